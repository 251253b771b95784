"""State-vector simulation of order finding with fluctuation and noise diagnostics."""

from .kernels import BACKEND
from .state import RegisterLayout, init_state, apply_step, inner_product, register1_distribution, bit_reverse, densify
from .shor import build_schedule, run_clean, multiplicative_order, success_set, success_probability

__version__ = "0.1.0"
