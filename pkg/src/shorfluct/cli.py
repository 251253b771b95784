"""Command-line front end.

Subcommands: ``trace``, ``spectrum``, ``noise-scan``, ``state-noise`` and
``scaling``.  Each reads an INI run config (see :mod:`shorfluct.config`),
applies flag overrides and writes CSV tables, a JSON summary and,
with ``--svg``, a plot into the output directory.

Exit codes: 0 success, 2 configuration error, 3 memory cap exceeded.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, RunConfig
from .decoherence import (
    combined_success_estimate,
    fragility_fit,
    state_noise_sweep,
    step_noise_scan,
)
from .noise import NoiseConfig, analytic_C
from .observables import AXES, SCOPES, AdditiveOperatorSpec, estimate_p, scope_fluctuations, trace_fluctuations
from .output import svg_plot, write_csv, write_json
from .shor import (
    build_schedule,
    frequency_distribution,
    iter_clean,
    multiplicative_order,
    run_clean,
    success_probability,
    success_set,
)
from .state import MemoryCapError

log = logging.getLogger("shorfluct")

EXIT_OK, EXIT_CONFIG, EXIT_MEMORY = 0, 2, 3
ZERO_FLUCT = 1e-14


def _noise_config(cfg: RunConfig, Q: int, components: Optional[str] = None, lam: Optional[float] = None):
    try:
        return NoiseConfig(
            lam=cfg.lam if lam is None else lam,
            components=cfg.components if components is None else components,
            n_samples=cfg.samples,
            seed=cfg.seed,
            Q=Q,
            omega_high_factor=cfg.omega_high_factor,
            substeps=cfg.substeps,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _out(cfg: RunConfig, name: str) -> Path:
    return Path(cfg.out) / name


# --------------------------------------------------------------------------
# commands


def cmd_trace(cfg: RunConfig) -> dict:
    layout = cfg.layout()
    schedule = build_schedule(layout)
    stream = iter_clean(layout, cfg.backend, schedule, cfg.max_amplitudes)
    if cfg.capture == "boundaries":
        keep = set(schedule.boundaries().values())
        stream = ((m, psi) for m, psi in stream if m in keep)
    records = trace_fluctuations(stream, phase_of=schedule.phase_of)
    path = write_csv(
        _out(cfg, "trace.csv"),
        "trace",
        ["step", "phase", "alpha", "scope", "fluct"],
        [(r.step, r.phase, r.alpha, r.scope, r.fluct) for r in records],
    )
    log.info("wrote %d rows to %s", len(records), path)
    if cfg.svg:
        series: dict = {}
        for r in records:
            series.setdefault(f"{r.alpha}/{r.scope}", []).append((r.step, r.fluct))
        svg_plot(
            _out(cfg, "trace.svg"), series, title=f"N={layout.N}, x={layout.x}, L={layout.L}",
            xlabel="step m", ylabel="fluctuation",
        )
    return {"rows": len(records)}


def cmd_spectrum(cfg: RunConfig) -> dict:
    layout = cfg.layout()
    schedule = build_schedule(layout)
    final = run_clean(layout, cfg.backend, {schedule.Q}, cfg.max_amplitudes)[schedule.Q]
    P = frequency_distribution(final)
    sset = success_set(layout)
    T_clean = success_probability(final, sset)
    write_csv(_out(cfg, "spectrum.csv"), "spectrum", ["cbar", "P"], [(c, float(p)) for c, p in enumerate(P)])
    r = multiplicative_order(layout.x, layout.N)
    peaks = sorted(int(c) for c in np.argsort(P, kind="stable")[::-1][:r])
    summary = {
        "N": layout.N, "x": layout.x, "L1": layout.L1, "L2": layout.L2,
        "order": r,
        "success_set": list(sset.cbars),
        "convergents": {str(c): str(f) for c, f in sset.convergents.items()},
        "T_clean": T_clean,
        "total_probability": float(P.sum()),
        "dominant_peaks": peaks,
    }
    write_json(_out(cfg, "spectrum.json"), "spectrum", summary)
    if cfg.svg:
        svg_plot(
            _out(cfg, "spectrum.svg"), {"P": list(enumerate(P.tolist()))},
            title=f"N={layout.N}, x={layout.x}", xlabel="frequency label", ylabel="probability",
        )
    log.info("T_clean = %.10f", T_clean)
    return summary


def cmd_noise_scan(cfg: RunConfig) -> dict:
    if cfg.backend != "dense":
        raise ConfigError("noise-scan needs the dense backend")
    layout = cfg.layout()
    schedule = build_schedule(layout)
    ncfg = _noise_config(cfg, schedule.Q)
    reports = step_noise_scan(layout, ncfg, cfg.steps, cfg.max_amplitudes)
    final = run_clean(layout, "dense", {schedule.Q}, cfg.max_amplitudes)[schedule.Q]
    T_clean = success_probability(final, success_set(layout))
    write_csv(
        _out(cfg, "noise_scan.csv"),
        "noise_scan",
        ["m", "F", "F_stderr", "S", "Gamma", "T", "T_stderr", "r_m"],
        [(r.m, r.F, r.F_stderr, r.S, r.Gamma, r.T, r.T_stderr, r.r_m) for r in reports],
    )
    summary = {
        "lambda": ncfg.lam, "components": ncfg.components, "samples": ncfg.n_samples, "seed": ncfg.seed,
        "C": analytic_C(ncfg), "T_clean": T_clean, "steps": len(reports),
    }
    if cfg.steps is None:
        est = combined_success_estimate(reports, T_clean, range(schedule.Q + 1))
        summary.update(T_combined=est.T, epsilon=est.epsilon, T_exponential=est.T_exponential)
    write_json(_out(cfg, "noise_scan.json"), "noise_scan", summary)
    if cfg.svg:
        svg_plot(
            _out(cfg, "noise_scan.svg"), {f"{ncfg.components}-noise": [(r.F, r.T) for r in reports]},
            title=f"lambda={ncfg.lam:g}", xlabel="fidelity F", ylabel="success probability T", markers=True,
        )
    return summary


def cmd_state_noise(cfg: RunConfig) -> dict:
    if cfg.backend != "dense":
        raise ConfigError("state-noise needs the dense backend")
    layout = cfg.layout()
    schedule = build_schedule(layout)
    m = 2 * layout.L1 if cfg.state_step is None else cfg.state_step
    if not 0 <= m <= schedule.Q:
        raise ConfigError(f"step {m} outside 0..{schedule.Q}")
    if not cfg.lambda_grid:
        raise ConfigError("empty lambda grid")
    _noise_config(cfg, schedule.Q)  # validates the shared noise fields
    T_clean, rows = state_noise_sweep(
        layout, m, cfg.lambda_grid, tuple(cfg.components), cfg.samples, cfg.seed,
        cfg.omega_high_factor, cfg.max_amplitudes,
    )
    write_csv(
        _out(cfg, "state_noise.csv"),
        "state_noise",
        ["lambda", "component", "F", "F_stderr", "T", "T_stderr", "S", "r_m"],
        [(r.lam, r.component, r.F, r.F_stderr, r.T, r.T_stderr, r.S, r.r_m) for r in rows],
    )
    fits = {}
    for comp in cfg.components:
        sel = [r for r in rows if r.component == comp]
        fits[comp] = _line_fit([r.F for r in sel], [r.T for r in sel])
    summary = {"step": m, "phase": schedule.phase_of(m), "T_clean": T_clean, "fits": fits}
    write_json(_out(cfg, "state_noise.json"), "state_noise", summary)
    if cfg.svg:
        svg_plot(
            _out(cfg, "state_noise.svg"),
            {f"{c}-noise": [(r.F, r.T) for r in rows if r.component == c] for c in cfg.components},
            title=f"state after step {m}", xlabel="fidelity F", ylabel="success probability T", markers=True,
        )
    return summary


def _line_fit(xs: Sequence[float], ys: Sequence[float]) -> dict:
    xs, ys = np.asarray(xs), np.asarray(ys)
    if len(xs) < 2 or np.ptp(xs) == 0:
        return {"slope": math.nan, "intercept": math.nan, "r2": math.nan}
    slope, icpt = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + icpt)
    ss = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
    return {"slope": float(slope), "intercept": float(icpt), "r2": r2}


def scaling_report(cfg: RunConfig) -> dict:
    """Boundary-state fluctuations for every instance, fitted indices and fragility exponents."""
    if len(cfg.instances) < 2:
        raise ConfigError("scaling needs at least two instances")
    try:
        layouts = [inst.layout() for inst in cfg.instances]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    table = []
    for layout in layouts:
        schedule = build_schedule(layout)
        bounds = schedule.boundaries()
        backend = cfg.backend
        if backend == "dense" and layout.dim > cfg.max_amplitudes:
            backend = "structured"
        states = run_clean(layout, backend, set(bounds.values()), cfg.max_amplitudes)
        for name, m in bounds.items():
            for alpha in AXES:
                for scope, val in scope_fluctuations(states[m], alpha).items():
                    table.append(
                        {"N": layout.N, "x": layout.x, "L": layout.L, "state": name, "step": m,
                         "alpha": alpha, "scope": scope, "fluct": val}
                    )
        log.info("N=%d L=%d done (%s backend)", layout.N, layout.L, backend)

    fits = []
    for name in ("init", "HT", "ME", "final"):
        for scope in SCOPES:
            for alpha in AXES:
                pts = [(t["L"], t["fluct"]) for t in table
                       if t["state"] == name and t["alpha"] == alpha and t["scope"] == scope]
                spec = AdditiveOperatorSpec(alpha, scope)
                if any(f <= ZERO_FLUCT for _, f in pts):
                    # an exactly vanishing fluctuation has no finite index
                    fits.append({"state": name, "alpha": alpha, "scope": scope,
                                 "p": -math.inf, "classification": "NFS"})
                    continue
                est = estimate_p(pts, spec)
                fits.append({"state": name, "alpha": alpha, "scope": scope,
                             "p": est.p, "classification": est.classification})

    # Perturbative decoherence rates share one autocorrelation value, so it
    # cancels from the fitted exponent.
    Q0 = build_schedule(layouts[0]).Q
    C = analytic_C(NoiseConfig(lam=cfg.lam, components="x", Q=Q0, omega_high_factor=cfg.omega_high_factor))
    fragility = []
    for name in ("HT", "ME"):
        for alpha in AXES:
            pts = []
            for t in table:
                if t["state"] == name and t["alpha"] == alpha and t["scope"] == "all":
                    gamma = cfg.lam**2 * t["L"] ** 2 * C * t["fluct"]
                    pts.append((t["L"], gamma))
            if all(g > 0 for _, g in pts):
                fit = fragility_fit(pts)
                fragility.append({"state": name, "noise": alpha, "exponent": fit.exponent, "delta": fit.delta})
            else:
                fragility.append({"state": name, "noise": alpha, "exponent": math.nan, "delta": math.nan})
    return {"table": table, "fits": fits, "fragility": fragility, "C": C}


def cmd_scaling(cfg: RunConfig) -> dict:
    rep = scaling_report(cfg)
    write_csv(
        _out(cfg, "scaling.csv"),
        "scaling",
        ["N", "x", "L", "state", "step", "alpha", "scope", "fluct"],
        [(t["N"], t["x"], t["L"], t["state"], t["step"], t["alpha"], t["scope"], t["fluct"]) for t in rep["table"]],
    )
    write_csv(
        _out(cfg, "scaling_p.csv"),
        "scaling_p",
        ["state", "alpha", "scope", "p", "classification"],
        [(f["state"], f["alpha"], f["scope"], f["p"], f["classification"]) for f in rep["fits"]],
    )
    summary = {
        "instances": [str(i) for i in cfg.instances],
        "afs": [f"{f['state']}:{f['alpha']}/{f['scope']}" for f in rep["fits"] if f["classification"] == "AFS"],
        "fragility": rep["fragility"],
        "C": rep["C"],
    }
    write_json(_out(cfg, "scaling.json"), "scaling", summary)
    if cfg.svg:
        series: dict = {}
        for t in rep["table"]:
            if t["scope"] == "R1":
                series.setdefault(f"{t['state']} {t['alpha']}/R1", []).append((t["L"], t["fluct"]))
        svg_plot(_out(cfg, "scaling.svg"), series, title="R1 fluctuation vs size", xlabel="L",
                 ylabel="fluctuation", markers=True)
    return summary


COMMANDS = {
    "trace": cmd_trace,
    "spectrum": cmd_spectrum,
    "noise-scan": cmd_noise_scan,
    "state-noise": cmd_state_noise,
    "scaling": cmd_scaling,
}


# --------------------------------------------------------------------------
# argument handling


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of floats: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI run config; defaults reproduce N=21, x=2")
    common.add_argument("--seed", type=int, help="noise seed (unsigned 64-bit)")
    common.add_argument("--lambda", dest="lam", type=float, help="noise strength in hbar/tau")
    common.add_argument("--components", help="active noise components, a subset of xyz")
    common.add_argument("--samples", type=int, help="noise realizations per ensemble")
    common.add_argument("--backend", choices=("dense", "structured"))
    common.add_argument("--out", help="output directory")
    common.add_argument("--svg", action="store_const", const=True, help="also write an SVG plot")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="shorfluct", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("trace", parents=[common], help="fluctuations of every intermediate state")
    sub.add_parser("spectrum", parents=[common], help="final frequency distribution and success set")
    sub.add_parser("noise-scan", parents=[common], help="noise after each single step")
    sn = sub.add_parser("state-noise", parents=[common], help="noise-strength sweep on one state")
    sn.add_argument("--step", type=int, help="state index m (default 2*L1)")
    sn.add_argument("--lambda-grid", type=_float_list, help="comma-separated strengths")
    sub.add_parser("scaling", parents=[common], help="size scaling of boundary-state fluctuations")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    try:
        return cfg.replace(
            seed=args.seed, lam=args.lam, components=args.components, samples=args.samples,
            backend=args.backend, out=args.out, svg=args.svg,
            state_step=getattr(args, "step", None), lambda_grid=getattr(args, "lambda_grid", None),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MemoryCapError as exc:
        print(f"memory cap: {exc}", file=sys.stderr)
        return EXIT_MEMORY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
