"""Kernel backend selection.

The compiled extension is preferred; the NumPy implementation is used when
it is missing or when the environment variable ``SHORFLUCT_PURE`` is set to
a non-empty value other than ``0``.  ``BACKEND`` names the active one.
"""

import os

from . import _kernels_py

_force_pure = os.environ.get("SHORFLUCT_PURE", "") not in ("", "0")

if _force_pure:
    _impl = _kernels_py
    BACKEND = "numpy"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "numpy"

apply_1q = _impl.apply_1q
apply_hadamard = _impl.apply_hadamard
apply_phase_mask = _impl.apply_phase_mask
gather_columns = _impl.gather_columns
roll_rows_masked = _impl.roll_rows_masked
pauli_sum = _impl.pauli_sum

__all__ = [
    "BACKEND",
    "apply_1q",
    "apply_hadamard",
    "apply_phase_mask",
    "gather_columns",
    "roll_rows_masked",
    "pauli_sum",
]
