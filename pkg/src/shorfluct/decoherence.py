"""Ensemble post-processing of noisy runs.

Ensembles are stacks of pure states; the ensemble-averaged density matrix is
never formed.  Fidelity is the mean squared overlap with the clean state and
the order-2 Renyi entropy comes from the Gram matrix of the members.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .noise import NoiseConfig, analytic_C, apply_noise_batch, phi2_variance, step_unitaries
from .observables import AdditiveOperatorSpec, loglog_slope, magnetization_fluct
from .shor import build_schedule, run_clean, success_indices, success_set
from .state import (
    DEFAULT_MAX_AMPLITUDES,
    MemoryCapError,
    PureState,
    RegisterLayout,
    StructuredState,
    apply_to_dense_array,
)


class DegenerateFidelityError(ValueError):
    pass


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


@dataclass(frozen=True)
class StepNoiseReport:
    m: int
    F: float
    F_stderr: float
    S: float
    S_stderr: float
    Gamma: float
    T: float
    T_stderr: float
    r_m: float
    n_samples: int
    lam: float
    components: str


@dataclass(frozen=True)
class PerturbativePrediction:
    m: Optional[int]
    F: float
    Gamma: float
    contributions: dict = field(default_factory=dict)


def _as_matrix(states) -> np.ndarray:
    if isinstance(states, np.ndarray):
        return states.reshape(states.shape[0], -1)
    states = list(states)
    if not states:
        raise ValueError("empty ensemble")
    if any(s.layout != states[0].layout or type(s) is not type(states[0]) for s in states):
        raise ValueError("ensemble members must share layout and backend")
    return np.stack([s.amps.reshape(-1) for s in states])


def _block_means(values: np.ndarray, block: int) -> np.ndarray:
    n = len(values) // block * block
    return values[:n].reshape(-1, block).mean(axis=1)


def _stderr(values: np.ndarray, block: int = 1) -> float:
    means = _block_means(values, block)
    if len(means) < 2:
        return float("nan")
    return float(means.std(ddof=1) / math.sqrt(len(means)))


def fidelity_ensemble(psi: PureState, perturbed, block: int = 1) -> Estimate:
    """Mean of ``|<psi|psi'_nu>|^2``.

    ``block`` groups consecutive members (antithetic pairs) before the
    standard error is taken.
    """
    mat = _as_matrix(perturbed)
    if mat.shape[0] == 0:
        raise ValueError("empty ensemble")
    ov = np.abs(mat.conj() @ psi.amps.reshape(-1)) ** 2
    return Estimate(float(ov.mean()), _stderr(ov, block))


def purity_from_gram(gram2: np.ndarray) -> float:
    n = gram2.shape[0]
    return float(gram2.sum() / (n * n))


def entropy_ensemble(perturbed, block: int = 1) -> Estimate:
    """``-ln Tr[rho'^2]`` from all pairwise overlaps; stderr by block jackknife."""
    mat = _as_matrix(perturbed)
    n = mat.shape[0]
    if n == 0:
        raise ValueError("empty ensemble")
    gram2 = np.abs(mat.conj() @ mat.T) ** 2
    s = -math.log(purity_from_gram(gram2))
    nb = n // block
    if nb < 2:
        return Estimate(s, float("nan"))
    reps = []
    for b in range(nb):
        keep = np.ones(n, dtype=bool)
        keep[b * block : (b + 1) * block] = False
        reps.append(-math.log(purity_from_gram(gram2[np.ix_(keep, keep)])))
    reps = np.array(reps)
    se = math.sqrt((nb - 1) / nb * np.sum((reps - reps.mean()) ** 2))
    return Estimate(s, se)


def gamma_from_entropy(S: float, tau: float = 1.0) -> float:
    if S < -1e-10:
        raise ValueError(f"entropy must be non-negative, got {S}")
    return S / (2 * tau)


def reduction_rate(T_clean: float, T_m: float, F_m: float) -> float:
    if F_m >= 1 - 1e-12:
        raise DegenerateFidelityError("fidelity is 1; the reduction rate is undefined")
    return (T_clean - T_m) / (1 - F_m)


def perturbative_fidelity(
    psi: PureState, config: NoiseConfig, m: Optional[int] = None, C: Optional[float] = None
) -> PerturbativePrediction:
    """Second-order fidelity and decoherence rate from clean-state fluctuations."""
    L = psi.layout.L
    C = analytic_C(config) if C is None else C
    pref = config.lam**2 * L * L
    contrib = {
        a: pref * C * magnetization_fluct(psi, AdditiveOperatorSpec(a, "all")) for a in config.active
    }
    total = sum(contrib.values())
    return PerturbativePrediction(m, 1.0 - total, total / config.tau, contrib)


def fidelity_sampling_sigma(psi: PureState, config: NoiseConfig) -> float:
    """Standard deviation of the ensemble fidelity around its second-order mean.

    To second order ``1 - F`` is ``lam^2 L^2 sum_a fluct_a Phi_a^2`` averaged
    over the ensemble, so its spread follows from ``Var(Phi^2)``.  Antithetic
    partners share ``Phi^2``, leaving ``n / 2`` independent draws.
    """
    L = psi.layout.L
    n_ind = config.n_samples // 2 if config.antithetic else config.n_samples
    n_ind = max(n_ind, 1)
    var = phi2_variance(config)
    total = 0.0
    for a in config.active:
        f = magnetization_fluct(psi, AdditiveOperatorSpec(a, "all"))
        total += (config.lam**2 * L * L * f) ** 2 * var / n_ind
    return math.sqrt(total)


# --------------------------------------------------------------------------
# noisy runs


def _batch_limit(layout: RegisterLayout, cap: int) -> int:
    return max(1, cap // layout.dim)


def _continue_and_score(
    batch: np.ndarray, layout: RegisterLayout, steps: Sequence, idx: np.ndarray
) -> np.ndarray:
    """Run ``steps`` on every member and return each member's success probability."""
    for step in steps:
        batch = apply_to_dense_array(batch, layout, step)
    sel = batch[:, :, idx]
    return np.sum(sel.real**2 + sel.imag**2, axis=(1, 2))


def perturb_and_continue(
    psi: PureState,
    m: int,
    us: np.ndarray,
    layout: RegisterLayout,
    schedule,
    idx: np.ndarray,
    max_amplitudes: int = DEFAULT_MAX_AMPLITUDES,
    block: int = 1,
    entropy: bool = True,
):
    """Noise ``us[nu]`` after step ``m``, then the clean remainder of the run.

    Members are processed in chunks that respect ``max_amplitudes``.  The
    entropy needs every pairwise overlap, so with ``entropy=True`` the whole
    ensemble must fit in one chunk; pass ``entropy=False`` for large
    ensembles and ``S`` is returned as ``None``.

    Returns ``(F, S, T_values)``.
    """
    if isinstance(psi, StructuredState):
        raise ValueError("noisy runs need the dense backend")
    n = us.shape[0]
    chunk = _batch_limit(layout, max_amplitudes)
    if entropy and n > chunk:
        raise MemoryCapError(n * layout.dim, max_amplitudes)
    base = psi.amps
    ref = base.reshape(-1)
    ov = np.empty(n)
    T = np.empty(n)
    S = None
    rest = schedule.steps[m:]
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        part = np.empty((hi - lo,) + base.shape, dtype=np.complex128)
        part[:] = base
        apply_noise_batch(part.reshape(hi - lo, -1), us[lo:hi], layout.L)
        ov[lo:hi] = np.abs(part.reshape(hi - lo, -1).conj() @ ref) ** 2
        if entropy:
            S = entropy_ensemble(part, block)
        T[lo:hi] = _continue_and_score(part, layout, rest, idx)
    F = Estimate(float(ov.mean()), _stderr(ov, block))
    return F, S, T


def step_noise_scan(
    layout: RegisterLayout,
    config: NoiseConfig,
    steps: Optional[Iterable[int]] = None,
    max_amplitudes: int = DEFAULT_MAX_AMPLITUDES,
) -> list[StepNoiseReport]:
    """Noise between step ``m`` and ``m + 1`` only, for each requested ``m``.

    ``steps=None`` scans ``m = 0..Q``; ``m = Q`` is noise on the final state
    just before readout.
    """
    schedule = build_schedule(layout)
    if config.Q != schedule.Q:
        raise ValueError(f"noise config built for Q={config.Q}, schedule has Q={schedule.Q}")
    ms = list(range(schedule.Q + 1)) if steps is None else sorted(set(steps))
    states = run_clean(layout, "dense", set(ms) | {schedule.Q}, max_amplitudes)
    sset = success_set(layout)
    idx = success_indices(sset, layout.L1)
    final = states[schedule.Q].amps
    T_clean = float(np.sum(np.abs(final[:, idx]) ** 2))
    us = step_unitaries(config)
    block = 2 if config.antithetic else 1
    reports = []
    for m in ms:
        F, S, T = perturb_and_continue(states[m], m, us, layout, schedule, idx, max_amplitudes, block)
        T_mean = float(T.mean())
        try:
            r = reduction_rate(T_clean, T_mean, F.value)
        except DegenerateFidelityError:
            r = float("nan")
        reports.append(
            StepNoiseReport(
                m=m,
                F=F.value,
                F_stderr=F.stderr,
                S=S.value,
                S_stderr=S.stderr,
                Gamma=gamma_from_entropy(S.value if S.value > 0 else 0.0, config.tau),
                T=T_mean,
                T_stderr=_stderr(T, block),
                r_m=r,
                n_samples=config.n_samples,
                lam=config.lam,
                components=config.components,
            )
        )
    return reports


@dataclass(frozen=True)
class SweepRow:
    lam: float
    component: str
    F: float
    F_stderr: float
    T: float
    T_stderr: float
    S: float
    r_m: float


def state_noise_sweep(
    layout: RegisterLayout,
    m: int,
    lambdas: Sequence[float],
    components: Sequence[str] = ("x", "y", "z"),
    n_samples: int = 200,
    seed: int = 0,
    omega_high_factor: float = 4.1,
    max_amplitudes: int = DEFAULT_MAX_AMPLITUDES,
) -> tuple[float, list[SweepRow]]:
    """Single-component noise of several strengths on the state after step ``m``.

    The same seed is used for every strength, so the realizations only
    rescale with ``lam``.  Returns ``(T_clean, rows)``.
    """
    schedule = build_schedule(layout)
    if not 0 <= m <= schedule.Q:
        raise IndexError(f"step {m} outside 0..{schedule.Q}")
    states = run_clean(layout, "dense", {m, schedule.Q}, max_amplitudes)
    idx = success_indices(success_set(layout), layout.L1)
    T_clean = float(np.sum(np.abs(states[schedule.Q].amps[:, idx]) ** 2))
    rows = []
    for comp in components:
        for lam in lambdas:
            cfg = NoiseConfig(
                lam=lam, components=comp, n_samples=n_samples, seed=seed, Q=schedule.Q,
                omega_high_factor=omega_high_factor,
            )
            block = 2 if cfg.antithetic else 1
            F, S, T = perturb_and_continue(
                states[m], m, step_unitaries(cfg), layout, schedule, idx, max_amplitudes, block
            )
            T_mean = float(T.mean())
            try:
                r = reduction_rate(T_clean, T_mean, F.value)
            except DegenerateFidelityError:
                r = float("nan")
            rows.append(SweepRow(lam, comp, F.value, F.stderr, T_mean, _stderr(T, block), S.value, r))
    return T_clean, rows


# --------------------------------------------------------------------------
# estimates


@dataclass(frozen=True)
class CombinedEstimate:
    T: float
    epsilon: float
    T_exponential: float
    epsilon_exponential: float


def combined_success_estimate(
    reports: Sequence[StepNoiseReport], T_clean: float, expected_steps: Optional[Iterable[int]] = None
) -> CombinedEstimate:
    """Success probability when every step suffers its own single-step loss."""
    steps = [r.m for r in reports]
    if len(set(steps)) != len(steps):
        raise ValueError("duplicate steps in reports")
    if expected_steps is not None:
        missing = set(expected_steps) - set(steps)
        if missing:
            raise ValueError(f"missing steps: {sorted(missing)}")
    ratios = np.array([r.T / T_clean for r in reports])
    eps = float(np.prod(ratios))
    eps_exp = float(math.exp(-np.sum(1 - ratios)))
    return CombinedEstimate(T_clean * eps, eps, T_clean * eps_exp, eps_exp)


@dataclass(frozen=True)
class FragilityFit:
    exponent: float
    delta: float


def fragility_fit(points: Sequence[tuple[float, float]]) -> FragilityFit:
    """Fit ``Gamma ~ L**(1 + delta)``."""
    if len({float(L) for L, _ in points}) < 2:
        raise ValueError("need at least two distinct system sizes")
    if any(g <= 0 for _, g in points):
        raise ValueError("decoherence rates must be positive")
    slope = loglog_slope(points)
    return FragilityFit(slope, slope - 1.0)
