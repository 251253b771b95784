"""Register layout, state containers and the elementary gates of the run.

Basis convention: qubit ``l`` (1-based) of register R1 is bit ``l - 1`` of
the R1 label ``a``, and likewise for R2.  A dense state stores its
amplitudes as a ``(2**L2, 2**L1)`` array, so the flat index is
``a + 2**L1 * s``.  A structured state stores one row per element of the
cyclic group ``G = {x**j mod N}``, which is all the R2 values the noise-free
run can ever reach when R2 starts at 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd
from typing import Union

import numpy as np

from . import kernels

DEFAULT_MAX_AMPLITUDES = 1 << 26


class MemoryCapError(MemoryError):
    """Raised when a dense array would exceed the configured amplitude cap."""

    def __init__(self, required: int, cap: int):
        self.required = required
        self.cap = cap
        super().__init__(
            f"dense state needs {required} amplitudes "
            f"({required * 16 / 2**30:.2f} GiB), cap is {cap}"
        )


class LayoutMismatchError(ValueError):
    pass


def _ceil_log2(n: int) -> int:
    return (n - 1).bit_length()


@dataclass(frozen=True)
class RegisterLayout:
    """Problem instance ``(N, x)`` and the widths of the two registers.

    The constructor accepts any widths, which is what experiments need; use
    :meth:`for_problem` to get the default widths for factoring ``N``.
    """

    N: int
    x: int
    L1: int
    L2: int

    def __post_init__(self):
        if self.L1 < 1 or self.L2 < 1:
            raise ValueError("both registers need at least one qubit")
        if not 1 < self.x < self.N:
            raise ValueError(f"need 1 < x < N, got x={self.x}, N={self.N}")
        if gcd(self.x, self.N) != 1:
            raise ValueError(f"x={self.x} is not coprime to N={self.N}")

    @classmethod
    def for_problem(cls, N: int, x: int) -> "RegisterLayout":
        """Default widths: the smallest L1 with 2**L1 >= N**2 and L2 with 2**L2 >= N."""
        if N % 2 == 0 or N < 9 or _is_prime(N):
            raise ValueError(f"N={N} is not an odd composite")
        return cls(N, x, _ceil_log2(N * N), _ceil_log2(N))

    @property
    def L(self) -> int:
        return self.L1 + self.L2

    @property
    def dim1(self) -> int:
        return 1 << self.L1

    @property
    def dim(self) -> int:
        return 1 << self.L


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    k = 2
    while k * k <= n:
        if n % k == 0:
            return False
        k += 1
    return True


# --------------------------------------------------------------------------
# gate steps


@dataclass(frozen=True)
class Hadamard:
    target: int


@dataclass(frozen=True)
class ControlledModMul:
    control: int
    multiplier: int


@dataclass(frozen=True)
class QftHadamard:
    target: int


@dataclass(frozen=True)
class ControlledPhase:
    control: int
    target: int
    angle: float


GateStep = Union[Hadamard, ControlledModMul, QftHadamard, ControlledPhase]


# --------------------------------------------------------------------------
# states


@dataclass
class PureState:
    layout: RegisterLayout
    amps: np.ndarray

    def copy(self):
        raise NotImplementedError

    def norm2(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    @property
    def backend(self) -> str:
        raise NotImplementedError


@dataclass
class DenseState(PureState):
    """Full amplitude array of shape ``(2**L2, 2**L1)``."""

    def __post_init__(self):
        shape = (1 << self.layout.L2, 1 << self.layout.L1)
        if self.amps.shape != shape:
            raise ValueError(f"dense amplitudes must have shape {shape}")

    @property
    def backend(self) -> str:
        return "dense"

    @property
    def vector(self) -> np.ndarray:
        """Flat view indexed by ``a + 2**L1 * s``."""
        return self.amps.reshape(-1)

    def copy(self) -> "DenseState":
        return DenseState(self.layout, self.amps.copy())

    @classmethod
    def from_vector(cls, layout: RegisterLayout, vec) -> "DenseState":
        vec = np.ascontiguousarray(vec, dtype=np.complex128)
        if vec.shape != (layout.dim,):
            raise ValueError(f"expected {layout.dim} amplitudes, got {vec.shape}")
        return cls(layout, vec.reshape(1 << layout.L2, 1 << layout.L1).copy())


@dataclass
class StructuredState(PureState):
    """Amplitudes on ``R1 x G``: row ``j`` holds the R2 value ``group[j]``."""

    group: tuple = field(default=())

    def __post_init__(self):
        if self.amps.shape != (len(self.group), 1 << self.layout.L1):
            raise ValueError("structured amplitudes must have shape (|G|, 2**L1)")

    @property
    def backend(self) -> str:
        return "structured"

    def copy(self) -> "StructuredState":
        return StructuredState(self.layout, self.amps.copy(), self.group)


def cyclic_group(x: int, N: int) -> tuple:
    """``(x**0, x**1, ..., x**(r-1)) mod N``."""
    g = [1]
    v = x % N
    while v != 1:
        g.append(v)
        v = v * x % N
        if len(g) > N:
            raise ValueError(f"x={x} has no multiplicative order mod {N}")
    return tuple(g)


def check_dense_size(n_amplitudes: int, cap: int = DEFAULT_MAX_AMPLITUDES) -> None:
    if n_amplitudes > cap:
        raise MemoryCapError(n_amplitudes, cap)


def init_state(
    layout: RegisterLayout,
    backend: str = "dense",
    max_amplitudes: int = DEFAULT_MAX_AMPLITUDES,
) -> PureState:
    """``|0>`` on R1 and ``|1>`` on R2."""
    if backend == "dense":
        check_dense_size(layout.dim, max_amplitudes)
        amps = np.zeros((1 << layout.L2, 1 << layout.L1), dtype=np.complex128)
        amps[1, 0] = 1.0
        return DenseState(layout, amps)
    if backend == "structured":
        group = cyclic_group(layout.x, layout.N)
        amps = np.zeros((len(group), 1 << layout.L1), dtype=np.complex128)
        amps[0, 0] = 1.0
        return StructuredState(layout, amps, group)
    raise ValueError(f"unknown backend {backend!r}")


def _check_r1_qubit(layout: RegisterLayout, q: int) -> None:
    if not 1 <= q <= layout.L1:
        raise IndexError(f"qubit {q} outside R1 (1..{layout.L1})")


@lru_cache(maxsize=256)
def _modmul_source(N: int, L1: int, L2: int, control: int, u: int) -> np.ndarray:
    dim1 = 1 << L1
    a = np.arange(dim1, dtype=np.intp)
    s = np.arange(1 << L2, dtype=np.intp)
    u_inv = pow(u, -1, N)
    pre = np.where(s < N, (s * u_inv) % N, s)
    ctrl = ((a >> (control - 1)) & 1).astype(bool)
    src = np.where(ctrl[None, :], a[None, :] + dim1 * pre[:, None], a[None, :] + dim1 * s[:, None])
    src = np.ascontiguousarray(src.reshape(-1))
    src.setflags(write=False)
    return src


def _validate_step(layout: RegisterLayout, step: GateStep) -> None:
    if isinstance(step, (Hadamard, QftHadamard)):
        _check_r1_qubit(layout, step.target)
    elif isinstance(step, ControlledPhase):
        _check_r1_qubit(layout, step.control)
        _check_r1_qubit(layout, step.target)
        if step.control == step.target:
            raise ValueError("controlled phase needs distinct qubits")
    elif isinstance(step, ControlledModMul):
        _check_r1_qubit(layout, step.control)
        if gcd(step.multiplier, layout.N) != 1:
            raise ValueError("multiplier must be coprime to N")
    else:
        raise TypeError(f"not a gate step: {step!r}")


def apply_to_dense_array(amps: np.ndarray, layout: RegisterLayout, step: GateStep) -> np.ndarray:
    """Apply ``step`` to a C-contiguous ``(..., 2**L2, 2**L1)`` array.

    R1-only gates act in place; the modular multiplication returns a new
    array.  Callers use the return value either way.
    """
    rows = amps.reshape(-1, layout.dim1)
    if isinstance(step, (Hadamard, QftHadamard)):
        kernels.apply_hadamard(rows, step.target - 1)
        return amps
    if isinstance(step, ControlledPhase):
        mask = (1 << (step.control - 1)) | (1 << (step.target - 1))
        kernels.apply_phase_mask(rows, mask, complex(np.cos(step.angle), np.sin(step.angle)))
        return amps
    if isinstance(step, ControlledModMul):
        if layout.N > (1 << layout.L2):
            raise ValueError(f"R2 with {layout.L2} qubits cannot hold residues mod {layout.N}")
        src = _modmul_source(layout.N, layout.L1, layout.L2, step.control, step.multiplier % layout.N)
        flat = amps.reshape(-1, layout.dim)
        return kernels.gather_columns(flat, src).reshape(amps.shape)
    raise TypeError(f"not a gate step: {step!r}")


def _apply_structured(state: StructuredState, step: GateStep) -> None:
    if isinstance(step, ControlledModMul):
        u = step.multiplier % state.layout.N
        try:
            shift = state.group.index(u)
        except ValueError:
            raise ValueError(f"multiplier {u} is not a power of x; structured backend cannot apply it") from None
        kernels.roll_rows_masked(state.amps, step.control - 1, shift)
    else:
        apply_to_dense_array(state.amps, state.layout, step)


def apply_step(state: PureState, step: GateStep, inplace: bool = False) -> PureState:
    _validate_step(state.layout, step)
    out = state if inplace else state.copy()
    if isinstance(out, StructuredState):
        _apply_structured(out, step)
    else:
        out.amps = apply_to_dense_array(out.amps, out.layout, step)
    return out


def densify(state: PureState, max_amplitudes: int = DEFAULT_MAX_AMPLITUDES) -> DenseState:
    if isinstance(state, DenseState):
        return state.copy()
    layout = state.layout
    check_dense_size(layout.dim, max_amplitudes)
    if max(state.group) >= 1 << layout.L2:
        raise ValueError("group element does not fit in R2")
    amps = np.zeros((1 << layout.L2, layout.dim1), dtype=np.complex128)
    amps[list(state.group), :] = state.amps
    return DenseState(layout, amps)


def inner_product(s1: PureState, s2: PureState) -> complex:
    """``<s1|s2>``, conjugate-linear in ``s1``."""
    if s1.layout != s2.layout:
        raise LayoutMismatchError(f"{s1.layout} != {s2.layout}")
    if isinstance(s1, StructuredState) and isinstance(s2, StructuredState) and s1.group == s2.group:
        return complex(np.vdot(s1.amps, s2.amps))
    return complex(np.vdot(densify(s1).amps, densify(s2).amps))


def register1_distribution(state: PureState, atol: float = 1e-10) -> np.ndarray:
    """Probability of each raw R1 label ``c``."""
    p = np.einsum("ij,ij->j", state.amps.real, state.amps.real) + np.einsum(
        "ij,ij->j", state.amps.imag, state.amps.imag
    )
    total = p.sum()
    if abs(total - 1.0) > atol:
        raise ValueError(f"state is not normalized (sum P = {total!r})")
    return p


def bit_reverse(c: int, width: int) -> int:
    if not 0 <= c < 1 << width:
        raise ValueError(f"{c} does not fit in {width} bits")
    out = 0
    for _ in range(width):
        out = (out << 1) | (c & 1)
        c >>= 1
    return out


def bit_reverse_table(width: int) -> np.ndarray:
    """``table[c] == bit_reverse(c, width)`` for every ``c``."""
    c = np.arange(1 << width, dtype=np.int64)
    out = np.zeros_like(c)
    for k in range(width):
        out |= ((c >> k) & 1) << (width - 1 - k)
    return out
