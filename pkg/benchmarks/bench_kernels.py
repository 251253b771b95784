"""Compare the compiled kernels with the NumPy fallback.

Micro-benchmarks call both implementations directly on the same random
state.  End-to-end workloads run in fresh interpreters, once with the
compiled kernels and once with ``SHORFLUCT_PURE=1``.

    python3 benchmarks/bench_kernels.py --qubits 20 --repeat 3
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from shorfluct import _kernels_py

try:
    from shorfluct import _kernels
except ImportError:
    _kernels = None

WORKLOADS = {
    "clean run L=15": (
        "from shorfluct import RegisterLayout, run_clean\n"
        "run_clean(RegisterLayout(21, 2, 10, 5), capture={75})"
    ),
    "trace L=15": (
        "from shorfluct import RegisterLayout, build_schedule\n"
        "from shorfluct.shor import iter_clean\n"
        "from shorfluct.observables import trace_fluctuations\n"
        "lay = RegisterLayout(21, 2, 10, 5)\n"
        "trace_fluctuations(iter_clean(lay, 'dense'))"
    ),
    "noise scan L=15, 3 steps": (
        "from shorfluct import RegisterLayout\n"
        "from shorfluct.noise import NoiseConfig\n"
        "from shorfluct.decoherence import step_noise_scan\n"
        "step_noise_scan(RegisterLayout(21, 2, 10, 5), NoiseConfig(0.0015, 'x'), steps=[10, 20, 75])"
    ),
}


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def micro(n_qubits, repeat):
    rng = np.random.default_rng(0)
    psi = rng.normal(size=(1, 1 << n_qubits)) + 1j * rng.normal(size=(1, 1 << n_qubits))
    u = np.array([[0.6, 0.8j], [0.8j, 0.6]])
    src = np.ascontiguousarray(rng.permutation(1 << n_qubits).astype(np.intp))
    w = np.ones(n_qubits, dtype=np.complex128)
    cases = {
        "apply_1q (all qubits)": lambda k, a: [k.apply_1q(a, q, u) for q in range(n_qubits)],
        "apply_hadamard (all qubits)": lambda k, a: [k.apply_hadamard(a, q) for q in range(n_qubits)],
        "apply_phase_mask": lambda k, a: k.apply_phase_mask(a, 0b101, 1j),
        "gather_columns": lambda k, a: k.gather_columns(a, src),
        "pauli_sum x": lambda k, a: k.pauli_sum(a, 0, n_qubits, 0, w),
        "pauli_sum z": lambda k, a: k.pauli_sum(a, 0, n_qubits, 2, w),
    }
    print(f"kernels on 2^{n_qubits} amplitudes (best of {repeat}, seconds)")
    print(f"{'kernel':32s} {'cython':>10s} {'numpy':>10s} {'speedup':>8s}")
    for name, fn in cases.items():
        t_py = _best(lambda: fn(_kernels_py, psi.copy()), repeat)
        if _kernels is None:
            print(f"{name:32s} {'-':>10s} {t_py:10.4f}")
            continue
        t_cy = _best(lambda: fn(_kernels, psi.copy()), repeat)
        print(f"{name:32s} {t_cy:10.4f} {t_py:10.4f} {t_py / t_cy:8.2f}")


def _run(code, pure):
    env = dict(os.environ, SHORFLUCT_PURE="1" if pure else "0")
    prog = f"import time\nt = time.perf_counter()\n{code}\nprint(time.perf_counter() - t)"
    res = subprocess.run([sys.executable, "-c", prog], env=env, capture_output=True, text=True, check=True)
    return float(res.stdout.strip().splitlines()[-1])


def end_to_end(repeat):
    print("\nend-to-end workloads (best of %d, seconds)" % repeat)
    print(f"{'workload':32s} {'cython':>10s} {'numpy':>10s} {'speedup':>8s}")
    for name, code in WORKLOADS.items():
        t_cy = min(_run(code, False) for _ in range(repeat))
        t_py = min(_run(code, True) for _ in range(repeat))
        print(f"{name:32s} {t_cy:10.4f} {t_py:10.4f} {t_py / t_cy:8.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--qubits", type=int, default=18)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args()
    if _kernels is None:
        print("compiled kernels not built; only the NumPy column is shown")
    micro(args.qubits, args.repeat)
    if not args.skip_end_to_end and _kernels is not None:
        end_to_end(args.repeat)


if __name__ == "__main__":
    main()
