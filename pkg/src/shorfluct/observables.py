"""Normalized additive Pauli operators and their fluctuations.

For an operator ``A = (1/n) sum_l w_l sigma_alpha(l)`` over the ``n`` sites
of a scope, the fluctuation ``<dA^dagger dA>`` is obtained from one auxiliary
vector ``v = sum_l w_l sigma_alpha(l) |psi>`` as
``(|v|^2 - |<psi|v>|^2) / n^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from . import kernels
from .state import DenseState, PureState, RegisterLayout, StructuredState

AXES = ("x", "y", "z")
SCOPES = ("all", "R1", "R2")
_AXIS_CODE = {"x": 0, "y": 1, "z": 2}

AFS_MIN_P = 1.5
NFS_MAX_P = 1.2
AFS_MIN_FLUCT = 0.1


@dataclass(frozen=True)
class AdditiveOperatorSpec:
    alpha: str
    scope: str = "all"
    k: float = 0.0

    def __post_init__(self):
        if self.alpha not in AXES:
            raise ValueError(f"alpha must be one of {AXES}")
        if self.scope not in SCOPES:
            raise ValueError(f"scope must be one of {SCOPES}")

    @property
    def label(self) -> str:
        return f"{self.alpha}/{self.scope}" + (f"/k={self.k:.6g}" if self.k else "")


def all_specs() -> list[AdditiveOperatorSpec]:
    return [AdditiveOperatorSpec(a, s) for s in SCOPES for a in AXES]


def scope_qubits(layout: RegisterLayout, scope: str) -> tuple[int, int]:
    """Half-open 0-based qubit range of ``scope`` in the flat dense index."""
    return {"all": (0, layout.L), "R1": (0, layout.L1), "R2": (layout.L1, layout.L)}[scope]


def _site_weights(n_sites: int, k: float) -> np.ndarray:
    if k == 0.0:
        return np.ones(n_sites, dtype=np.complex128)
    n = k * n_sites / (2 * math.pi)
    if abs(n - round(n)) > 1e-9 or not -n_sites / 2 < round(n) <= n_sites / 2:
        raise ValueError(f"k={k} is not on the grid 2*pi*n/{n_sites}")
    ell = np.arange(1, n_sites + 1)
    return np.exp(-1j * k * ell)


def _dense_aux(state: DenseState, alpha: int, q0: int, q1: int, w: np.ndarray):
    """``(aux, outside)`` with ``aux = sum_l w_l sigma_alpha(l) psi``; nothing leaves the basis."""
    return kernels.pauli_sum(state.amps.reshape(1, -1), q0, q1, alpha, w), 0.0


def _structured_aux(state: StructuredState, alpha: int, scope: str, w: np.ndarray):
    """Auxiliary rows on the group table plus the squared norm that falls outside it."""
    layout = state.layout
    L1 = layout.L1
    psi = state.amps
    if scope in ("all", "R1"):
        aux = kernels.pauli_sum(psi, 0, L1, alpha, w[:L1])
        w2 = w[L1:]
    else:
        aux = np.zeros_like(psi)
        w2 = w
    outside = 0.0
    if scope in ("all", "R2"):
        row_of = {g: j for j, g in enumerate(state.group)}
        if alpha == 2:
            for j, g in enumerate(state.group):
                sign = sum(wb * (1 - 2 * ((g >> b) & 1)) for b, wb in enumerate(w2))
                aux[j] += sign * psi[j]
        else:
            # sigma_x / sigma_y flip an R2 bit and can leave the group.  Flips
            # landing on a group value fold into a small row-mixing matrix;
            # the rest only contribute a norm, taken from the row Gram matrix.
            r = len(state.group)
            mix = np.zeros((r, r), dtype=np.complex128)
            stray: dict[int, np.ndarray] = {}
            for j, g in enumerate(state.group):
                for b, wb in enumerate(w2):
                    e = g ^ (1 << b)
                    coef = wb
                    if alpha == 1:
                        coef = wb * (1j if (e >> b) & 1 else -1j)
                    if e in row_of:
                        mix[row_of[e], j] += coef
                    else:
                        stray.setdefault(e, np.zeros(r, dtype=np.complex128))[j] += coef
            aux += mix @ psi
            if stray:
                gram = psi.conj() @ psi.T
                for e in sorted(stray):
                    c = stray[e]
                    outside += float((c.conj() @ gram @ c).real)
    return aux, outside


def _aux(state: PureState, code: int, scope: str, w: np.ndarray):
    if isinstance(state, StructuredState):
        return _structured_aux(state, code, scope, w)
    q0, q1 = scope_qubits(state.layout, scope)
    return _dense_aux(state, code, q0, q1, w)


def _variance(mean: complex, second: float, n: int) -> float:
    return max((second - abs(mean) ** 2) / (n * n), 0.0)


def _fluct(state: PureState, alpha: str, scope: str, k: float = 0.0) -> float:
    q0, q1 = scope_qubits(state.layout, scope)
    n = q1 - q0
    aux, outside = _aux(state, _AXIS_CODE[alpha], scope, _site_weights(n, k))
    psi = state.amps.reshape(aux.shape)
    return _variance(complex(np.vdot(psi, aux)), float(np.vdot(aux, aux).real) + outside, n)


def scope_fluctuations(state: PureState, alpha: str) -> dict:
    """Uniform-weight fluctuation on every scope from one R1 and one R2 pass."""
    layout = state.layout
    code = _AXIS_CODE[alpha]
    a1, o1 = _aux(state, code, "R1", np.ones(layout.L1, dtype=np.complex128))
    a2, o2 = _aux(state, code, "R2", np.ones(layout.L2, dtype=np.complex128))
    psi = state.amps.reshape(a1.shape)
    m1, m2 = complex(np.vdot(psi, a1)), complex(np.vdot(psi, a2))
    n11 = float(np.vdot(a1, a1).real) + o1
    n22 = float(np.vdot(a2, a2).real) + o2
    cross = float(np.vdot(a1, a2).real)
    return {
        "all": _variance(m1 + m2, n11 + n22 + 2 * cross, layout.L),
        "R1": _variance(m1, n11, layout.L1),
        "R2": _variance(m2, n22, layout.L2),
    }


def magnetization_fluct(state: PureState, spec: AdditiveOperatorSpec) -> float:
    """Variance of ``(1/n) sum_l sigma_alpha(l)`` over the sites in spec.scope."""
    if spec.k != 0.0:
        raise ValueError("magnetization_fluct needs k = 0; use fourier_fluct")
    return _fluct(state, spec.alpha, spec.scope)


def fourier_fluct(state: PureState, spec: AdditiveOperatorSpec) -> float:
    return _fluct(state, spec.alpha, spec.scope, spec.k)


def w_ratio(state: PureState, alpha: str) -> float:
    """R1 share of the fluctuation; NaN when the full-scope value vanishes."""
    den = magnetization_fluct(state, AdditiveOperatorSpec(alpha, "all"))
    if den <= 1e-14:
        return float("nan")
    return magnetization_fluct(state, AdditiveOperatorSpec(alpha, "R1")) / den


@dataclass(frozen=True)
class FluctuationRecord:
    step: int
    phase: str
    alpha: str
    scope: str
    fluct: float
    L: int


def trace_fluctuations(
    run: Union[Mapping[int, PureState], Iterable[tuple[int, PureState]]],
    specs: Optional[Sequence[AdditiveOperatorSpec]] = None,
    phase_of=None,
) -> list[FluctuationRecord]:
    """One record per captured step and spec, in step order.

    ``run`` is a ``{m: state}`` mapping or a stream of ``(m, state)`` pairs,
    so long runs can be traced without keeping every state.
    """
    specs = list(specs) if specs is not None else all_specs()
    items = sorted(run.items()) if isinstance(run, Mapping) else run
    out = []
    last = -1
    for m, psi in items:
        if m <= last:
            raise ValueError("steps must be strictly increasing")
        last = m
        phase = phase_of(m) if phase_of else ""
        shared = {a: scope_fluctuations(psi, a) for a in {s.alpha for s in specs if s.k == 0.0}}
        for spec in specs:
            val = shared[spec.alpha][spec.scope] if spec.k == 0.0 else fourier_fluct(psi, spec)
            out.append(FluctuationRecord(m, phase, spec.alpha, spec.scope, val, psi.layout.L))
    return out


# --------------------------------------------------------------------------
# index p


@dataclass(frozen=True)
class PIndexEstimate:
    points: tuple
    p: float
    classification: str
    spec: Optional[AdditiveOperatorSpec] = None
    delta: Optional[float] = None


def classify_p(p: float, fluct_at_largest_L: float) -> str:
    if p >= AFS_MIN_P and fluct_at_largest_L >= AFS_MIN_FLUCT:
        return "AFS"
    if p <= NFS_MAX_P:
        return "NFS"
    return "intermediate"


def loglog_slope(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of ``ln y`` against ``ln x``."""
    xs = np.log([float(a) for a, _ in points])
    ys = np.log([float(b) for _, b in points])
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)


def estimate_p(
    points: Sequence[tuple[int, float]], spec: Optional[AdditiveOperatorSpec] = None
) -> PIndexEstimate:
    """Fit ``fluct ~ L**(p - 2)`` and classify the state."""
    pts = tuple((int(L), float(f)) for L, f in points)
    if len({L for L, _ in pts}) < 2:
        raise ValueError("need at least two distinct system sizes")
    if any(f <= 0 for _, f in pts):
        raise ValueError("fluctuations must be positive for a log-log fit")
    p = 2.0 + loglog_slope(pts)
    largest = max(pts)[1]
    return PIndexEstimate(pts, p, classify_p(p, largest), spec)
