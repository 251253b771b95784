"""Classical 1/f noise on a discrete frequency grid, reduced to one 2x2 unitary per step.

Units: hbar = 1 and the step interval ``tau`` defaults to 1, so ``lam`` is
given in hbar/tau.  Each realization draws, per active component, one
random phase per grid frequency from a Philox stream keyed by
``(seed, pair, component)``.  With ``antithetic=True`` realizations come in
pairs whose phases differ by pi, so every finite ensemble has zero mean
signal at every instant.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .state import DenseState, PureState, StructuredState

log = logging.getLogger(__name__)

COMPONENTS = ("x", "y", "z")
PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}
_I2 = np.eye(2, dtype=np.complex128)


class NoiseBackendError(ValueError):
    """Bit-flip noise cannot be applied to a structured state."""


@dataclass(frozen=True)
class NoiseConfig:
    lam: float
    components: str = "x"
    n_samples: int = 40
    seed: int = 0
    Q: int = 75
    omega_high_factor: float = 4.1
    tau: float = 1.0
    substeps: int = 1024
    antithetic: bool = True

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.n_samples < 1:
            raise ValueError("need at least one noise realization")
        if any(c not in COMPONENTS for c in self.components) or len(set(self.components)) != len(
            self.components
        ):
            raise ValueError(f"components must be a subset of 'xyz', got {self.components!r}")
        if self.substeps < 2 or self.substeps % 2:
            raise ValueError("substeps must be an even number >= 2")

    @property
    def active(self) -> tuple:
        return tuple(c for c in COMPONENTS if c in self.components)

    @property
    def tau_total(self) -> float:
        return (self.Q + 1) * self.tau

    @property
    def d_omega(self) -> float:
        return 2 * math.pi / self.tau_total

    @property
    def omegas(self) -> np.ndarray:
        omega_high = self.omega_high_factor * 2 * math.pi / self.tau
        n = int(math.floor(omega_high / self.d_omega + 1e-9))
        if n < 1:
            raise ValueError("empty frequency grid: total time too short for the cutoff")
        return self.d_omega * np.arange(1, n + 1)

    @property
    def amplitudes(self) -> np.ndarray:
        return 1.0 / np.sqrt(self.omegas * self.tau)


@dataclass
class NoiseRealization:
    nu: int
    config: NoiseConfig
    phases: dict = field(default_factory=dict)


def _stream(seed: int, pair: int, comp: int) -> np.random.Generator:
    ss = np.random.SeedSequence([seed, pair, comp])
    return np.random.Generator(np.random.Philox(ss))


def sample_realization(config: NoiseConfig, nu: int) -> NoiseRealization:
    """Random phases on ``(-pi, pi]`` for every active component."""
    n = len(config.omegas)
    pair, flip = divmod(nu, 2) if config.antithetic else (nu, 0)
    phases = {}
    for alpha in config.active:
        u = _stream(config.seed, pair, COMPONENTS.index(alpha)).random(n)
        theta = math.pi - 2 * math.pi * u
        if flip:
            theta = np.where(theta <= 0, theta + math.pi, theta - math.pi)
        phases[alpha] = theta
    return NoiseRealization(nu, config, phases)


def noise_signal(real: NoiseRealization, alpha: str, t) -> np.ndarray:
    """``f_alpha(t)`` at the given times."""
    cfg = real.config
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.cos(np.outer(t, cfg.omegas) + real.phases[alpha]) @ cfg.amplitudes


def noise_integral(real: NoiseRealization, alpha: str, tau: Optional[float] = None) -> float:
    """Closed-form ``int_0^tau f_alpha(t) dt``."""
    cfg = real.config
    tau = cfg.tau if tau is None else tau
    w = cfg.omegas
    th = real.phases[alpha]
    return float(np.sum(cfg.amplitudes * (np.sin(w * tau + th) - np.sin(th)) / w))


@dataclass(frozen=True)
class AutocorrelationEstimate:
    analytic: float
    monte_carlo: float
    stderr: float
    n_samples: int


def analytic_C(config: NoiseConfig, tau: Optional[float] = None) -> float:
    """Ensemble mean of the squared step integral, summed per frequency."""
    if not config.active:
        return 0.0
    tau = config.tau if tau is None else tau
    w = config.omegas
    return float(np.sum(config.amplitudes**2 * (1 - np.cos(w * tau)) / w**2))


def phi2_variance(config: NoiseConfig, tau: Optional[float] = None) -> float:
    """Exact ensemble variance of the squared step integral.

    Each grid frequency contributes ``b_j cos(theta_j')`` with a uniform
    phase, so ``Var(Phi^2) = 2 C^2 - (3/8) sum_j b_j^4``.
    """
    if not config.active:
        return 0.0
    tau = config.tau if tau is None else tau
    w = config.omegas
    b2 = config.amplitudes**2 * (2 - 2 * np.cos(w * tau)) / w**2
    C = 0.5 * float(np.sum(b2))
    return 2 * C * C - 0.375 * float(np.sum(b2**2))


def _block_stderr(values: np.ndarray, block: int) -> float:
    n = len(values) // block * block
    if n == 0:
        return float("nan")
    means = values[:n].reshape(-1, block).mean(axis=1)
    if len(means) < 2:
        return float("nan")
    return float(means.std(ddof=1) / math.sqrt(len(means)))


def autocorrelation_C(
    config: NoiseConfig, tau: Optional[float] = None, n_samples: Optional[int] = None
) -> AutocorrelationEstimate:
    """Analytic value and a Monte Carlo estimate from the realization stream."""
    if not config.active:
        return AutocorrelationEstimate(0.0, 0.0, 0.0, 0)
    n = config.n_samples if n_samples is None else n_samples
    alpha = config.active[0]
    phi2 = np.array([noise_integral(sample_realization(config, nu), alpha, tau) ** 2 for nu in range(n)])
    block = 2 if config.antithetic else 1
    return AutocorrelationEstimate(analytic_C(config, tau), float(phi2.mean()), _block_stderr(phi2, block), n)


def _su2_exp(v: np.ndarray) -> np.ndarray:
    """``exp(-i v . sigma)`` for a real 3-vector ``v``."""
    a = float(np.linalg.norm(v))
    if a == 0.0:
        return _I2.copy()
    n = v / a
    gen = n[0] * PAULI["x"] + n[1] * PAULI["y"] + n[2] * PAULI["z"]
    return math.cos(a) * _I2 - 1j * math.sin(a) * gen


def _magnus4_unitary(real: NoiseRealization, n_sub: int) -> np.ndarray:
    cfg = real.config
    h = cfg.tau / n_sub
    t0 = np.arange(n_sub) * h
    c = math.sqrt(3) / 6
    f1 = np.zeros((n_sub, 3))
    f2 = np.zeros((n_sub, 3))
    for alpha in cfg.active:
        i = COMPONENTS.index(alpha)
        f1[:, i] = noise_signal(real, alpha, t0 + (0.5 - c) * h)
        f2[:, i] = noise_signal(real, alpha, t0 + (0.5 + c) * h)
    lam = cfg.lam
    # Gauss-Legendre fourth-order Magnus step; [a.s, b.s] = 2i (a x b).s
    v = 0.5 * h * lam * (f1 + f2) + (math.sqrt(3) / 6) * h * h * lam * lam * np.cross(f2, f1)
    u = _I2.copy()
    for k in range(n_sub):
        u = _su2_exp(v[k]) @ u
    return u


def step_unitary(real: NoiseRealization, n_sub: Optional[int] = None) -> np.ndarray:
    """Per-qubit unitary generated by the noise over one step interval.

    One active component gives the exact exponential of the step integral;
    several components are time-ordered with ``n_sub`` fourth-order Magnus
    substeps.
    """
    cfg = real.config
    active = cfg.active
    if cfg.lam == 0.0 or not active:
        return _I2.copy()
    if len(active) == 1:
        alpha = active[0]
        theta = cfg.lam * noise_integral(real, alpha)
        return math.cos(theta) * _I2 - 1j * math.sin(theta) * PAULI[alpha]
    return _magnus4_unitary(real, cfg.substeps if n_sub is None else n_sub)


def substep_convergence(real: NoiseRealization, n_sub: Optional[int] = None) -> float:
    """Operator-norm change of the step unitary when the substep width is halved."""
    n_sub = real.config.substeps if n_sub is None else n_sub
    return float(np.linalg.norm(_magnus4_unitary(real, 2 * n_sub) - _magnus4_unitary(real, n_sub), 2))


def step_unitaries(config: NoiseConfig, n: Optional[int] = None) -> np.ndarray:
    """``(n, 2, 2)`` stack of step unitaries for realizations ``0..n-1``."""
    n = config.n_samples if n is None else n
    return np.stack([step_unitary(sample_realization(config, nu)) for nu in range(n)])


def _is_diagonal(u: np.ndarray) -> bool:
    return abs(u[0, 1]) == 0.0 and abs(u[1, 0]) == 0.0


def apply_noise(state: PureState, u: np.ndarray, inplace: bool = False) -> PureState:
    """Apply ``u`` to every qubit of both registers."""
    u = np.asarray(u, dtype=np.complex128)
    out = state if inplace else state.copy()
    layout = state.layout
    if isinstance(out, StructuredState):
        if not _is_diagonal(u):
            raise NoiseBackendError("bit-flip noise would move R2 outside the group table")
        for q in range(layout.L1):
            kernels.apply_1q(out.amps, q, u)
        for j, g in enumerate(out.group):
            ph = 1.0 + 0j
            for b in range(layout.L2):
                ph *= u[1, 1] if (g >> b) & 1 else u[0, 0]
            out.amps[j] *= ph
        return out
    if not isinstance(out, DenseState):
        raise TypeError("unknown state type")
    flat = out.amps.reshape(1, -1)
    for q in range(layout.L):
        kernels.apply_1q(flat, q, u)
    return out


def apply_noise_batch(batch: np.ndarray, us: np.ndarray, n_qubits: int) -> None:
    """In place: row ``i`` of the ``(n, D)`` array gets ``us[i]`` on every qubit."""
    for i in range(batch.shape[0]):
        row = batch[i : i + 1]
        for q in range(n_qubits):
            kernels.apply_1q(row, q, us[i])
