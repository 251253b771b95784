"""Schedule of the simplified order-finding run and its classical post-processing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Optional

import numpy as np

from .state import (
    DEFAULT_MAX_AMPLITUDES,
    ControlledModMul,
    ControlledPhase,
    GateStep,
    Hadamard,
    PureState,
    QftHadamard,
    RegisterLayout,
    apply_step,
    bit_reverse,
    bit_reverse_table,
    init_state,
    register1_distribution,
)


def multiplicative_order(x: int, N: int) -> int:
    if math.gcd(x, N) != 1:
        raise ValueError(f"gcd({x}, {N}) != 1")
    v = x % N
    r = 1
    while v != 1 % N:
        v = v * x % N
        r += 1
    return r


@dataclass(frozen=True)
class Schedule:
    steps: tuple
    L1: int

    @property
    def Q(self) -> int:
        return len(self.steps)

    @property
    def hadamard_end(self) -> int:
        return self.L1

    @property
    def modexp_end(self) -> int:
        return 2 * self.L1

    @property
    def dft_end(self) -> int:
        return self.Q

    def phase_of(self, m: int) -> str:
        """Name of the phase the state after step ``m`` belongs to."""
        if m == 0:
            return "init"
        if m <= self.hadamard_end:
            return "hadamard"
        if m <= self.modexp_end:
            return "modexp"
        return "dft"

    def boundaries(self) -> dict:
        return {"init": 0, "HT": self.hadamard_end, "ME": self.modexp_end, "final": self.Q}


def build_schedule(layout: RegisterLayout) -> Schedule:
    L1 = layout.L1
    steps: list[GateStep] = [Hadamard(ell) for ell in range(1, L1 + 1)]
    steps += [
        ControlledModMul(ell, pow(layout.x, 1 << (ell - 1), layout.N)) for ell in range(1, L1 + 1)
    ]
    # No terminal swaps: R1 ends up holding the bit-reversed frequency.
    for j in range(L1, 0, -1):
        steps.append(QftHadamard(j))
        for jp in range(j - 1, 0, -1):
            steps.append(ControlledPhase(jp, j, math.pi / (1 << (j - jp))))
    sched = Schedule(tuple(steps), L1)
    assert sched.Q == 2 * L1 + L1 * (L1 + 1) // 2
    return sched


def iter_clean(
    layout: RegisterLayout,
    backend: str = "dense",
    schedule: Optional[Schedule] = None,
    max_amplitudes: int = DEFAULT_MAX_AMPLITUDES,
) -> Iterator[tuple[int, PureState]]:
    """Yield ``(m, psi_m)`` for ``m = 0..Q``.

    The yielded state is mutated by the next step; copy it to keep it.
    """
    schedule = schedule or build_schedule(layout)
    psi = init_state(layout, backend, max_amplitudes)
    yield 0, psi
    for m, step in enumerate(schedule.steps, start=1):
        psi = apply_step(psi, step, inplace=True)
        yield m, psi


def run_clean(
    layout: RegisterLayout,
    backend: str = "dense",
    capture: Optional[Iterable[int]] = None,
    max_amplitudes: int = DEFAULT_MAX_AMPLITUDES,
) -> dict[int, PureState]:
    """Noise-free run; returns copies of the post-step states in ``capture``.

    ``capture=None`` keeps every state ``0..Q``.
    """
    schedule = build_schedule(layout)
    wanted = set(range(schedule.Q + 1)) if capture is None else set(capture)
    bad = [m for m in wanted if not 0 <= m <= schedule.Q]
    if bad:
        raise IndexError(f"steps {sorted(bad)} outside 0..{schedule.Q}")
    out = {}
    for m, psi in iter_clean(layout, backend, schedule, max_amplitudes):
        if m in wanted:
            out[m] = psi.copy()
    return out


# --------------------------------------------------------------------------
# classical post-processing


@dataclass(frozen=True)
class OrderResult:
    cbar: int
    success: bool
    q: Optional[int]
    convergent: Optional[Fraction]
    reason: Optional[str] = None  # "no convergent" | "wrong order"


def convergents(frac: Fraction) -> list[Fraction]:
    out = []
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    num, den = frac.numerator, frac.denominator
    while den:
        a, rem = divmod(num, den)
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        out.append(Fraction(h1, k1))
        num, den = den, rem
    return out


def recover_order(cbar: int, layout: RegisterLayout, r: Optional[int] = None) -> OrderResult:
    """Continued-fraction order recovery from the frequency label ``cbar``.

    Success means a convergent ``p/q`` with ``q < N`` within ``2**-(L1+1)``
    of ``cbar / 2**L1``, ``x**q = 1 mod N`` and ``q`` equal to the true order.
    """
    M = layout.dim1
    if not 0 <= cbar < M:
        raise ValueError(f"cbar={cbar} outside 0..{M - 1}")
    if r is None:
        r = multiplicative_order(layout.x, layout.N)
    target = Fraction(cbar, M)
    bound = Fraction(1, 2 * M)
    found = None
    for cv in convergents(target):
        if cv.denominator >= layout.N:
            break
        if abs(target - cv) <= bound:
            found = cv
    if found is None:
        return OrderResult(cbar, False, None, None, "no convergent")
    q = found.denominator
    if pow(layout.x, q, layout.N) == 1 and q == r:
        return OrderResult(cbar, True, q, found)
    return OrderResult(cbar, False, q, found, "wrong order")


def order_from_measurement(c: int, layout: RegisterLayout, r: Optional[int] = None) -> OrderResult:
    """Order recovery from a raw R1 readout ``c`` (bit-reversed frequency)."""
    return recover_order(bit_reverse(c, layout.L1), layout, r)


@dataclass(frozen=True)
class SuccessSet:
    r: int
    cbars: tuple
    convergents: dict

    def __contains__(self, cbar: int) -> bool:
        return cbar in self.convergents


def success_set(layout: RegisterLayout, r: Optional[int] = None) -> SuccessSet:
    if r is None:
        r = multiplicative_order(layout.x, layout.N)
    conv = {}
    for cbar in range(layout.dim1):
        res = recover_order(cbar, layout, r)
        if res.success:
            conv[cbar] = res.convergent
    return SuccessSet(r, tuple(sorted(conv)), conv)


def success_indices(sset: SuccessSet, L1: int) -> np.ndarray:
    """Raw R1 labels whose bit reversal is in the success set."""
    table = bit_reverse_table(L1)
    return np.array(sorted(int(table[c]) for c in sset.cbars), dtype=np.intp)


def success_probability(state: PureState, sset: SuccessSet) -> float:
    p = register1_distribution(state)
    return float(p[success_indices(sset, state.layout.L1)].sum())


def frequency_distribution(state: PureState) -> np.ndarray:
    """``P`` indexed by the frequency label ``cbar`` instead of the raw readout."""
    p = register1_distribution(state)
    return p[bit_reverse_table(state.layout.L1)]
