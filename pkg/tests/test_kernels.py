import os
import subprocess
import sys

import numpy as np
import pytest

from shorfluct import _kernels_py as ref
from shorfluct import kernels

cy = pytest.importorskip("shorfluct._kernels", reason="compiled kernels not built")


def _state(rng, B=3, n=9):
    return np.ascontiguousarray(rng.normal(size=(B, 1 << n)) + 1j * rng.normal(size=(B, 1 << n)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.mark.parametrize("q", [0, 3, 8])
def test_apply_1q_matches(rng, q):
    psi = _state(rng)
    u = np.array([[0.3 + 0.1j, -0.2j], [0.7, 0.4 - 0.5j]])
    a, b = psi.copy(), psi.copy()
    cy.apply_1q(a, q, u)
    ref.apply_1q(b, q, u)
    np.testing.assert_allclose(a, b, atol=1e-14)


@pytest.mark.parametrize("q", [0, 4, 8])
def test_apply_hadamard_matches(rng, q):
    psi = _state(rng)
    a, b = psi.copy(), psi.copy()
    cy.apply_hadamard(a, q)
    ref.apply_hadamard(b, q)
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_hadamard_is_involution(rng):
    psi = _state(rng)
    a = psi.copy()
    kernels.apply_hadamard(a, 5)
    kernels.apply_hadamard(a, 5)
    np.testing.assert_allclose(a, psi, atol=1e-14)


def test_apply_phase_mask_matches(rng):
    psi = _state(rng)
    a, b = psi.copy(), psi.copy()
    cy.apply_phase_mask(a, 0b100100, np.exp(0.7j))
    ref.apply_phase_mask(b, 0b100100, np.exp(0.7j))
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_gather_columns_matches(rng):
    psi = _state(rng)
    src = np.ascontiguousarray(rng.permutation(psi.shape[1]).astype(np.intp))
    src.setflags(write=False)
    np.testing.assert_array_equal(cy.gather_columns(psi, src), ref.gather_columns(psi, src))


@pytest.mark.parametrize("shift", [0, 1, 4, -2, 13])
def test_roll_rows_masked_matches(rng, shift):
    psi = _state(rng, B=6)
    a, b = psi.copy(), psi.copy()
    cy.roll_rows_masked(a, 2, shift)
    ref.roll_rows_masked(b, 2, shift)
    np.testing.assert_array_equal(a, b)
    # only columns with bit 2 set move
    untouched = (np.arange(psi.shape[1]) >> 2) & 1 == 0
    np.testing.assert_array_equal(a[:, untouched], psi[:, untouched])


@pytest.mark.parametrize("alpha", [0, 1, 2])
@pytest.mark.parametrize("q0,q1", [(0, 9), (2, 7), (5, 9)])
def test_pauli_sum_matches(rng, alpha, q0, q1):
    psi = _state(rng)
    w = rng.normal(size=q1 - q0) + 1j * rng.normal(size=q1 - q0)
    np.testing.assert_allclose(cy.pauli_sum(psi, q0, q1, alpha, w), ref.pauli_sum(psi, q0, q1, alpha, w), atol=1e-12)


def test_pauli_sum_large_tiles(rng):
    # more than 14 qubits exercises the tiled path of the compiled kernel
    psi = _state(rng, B=1, n=16)
    w = np.ones(16, dtype=complex)
    for alpha in (0, 1):
        np.testing.assert_allclose(cy.pauli_sum(psi, 0, 16, alpha, w), ref.pauli_sum(psi, 0, 16, alpha, w), atol=1e-11)


def test_pauli_sum_single_qubit_matrices():
    # one qubit, basis |0>, |1>
    psi = np.array([[1.0 + 0j, 0.0]])
    w = np.ones(1)
    for impl in (cy, ref):
        np.testing.assert_allclose(impl.pauli_sum(psi, 0, 1, 0, w), [[0, 1]])
        np.testing.assert_allclose(impl.pauli_sum(psi, 0, 1, 1, w), [[0, 1j]])
        np.testing.assert_allclose(impl.pauli_sum(psi, 0, 1, 2, w), [[1, 0]])


def test_backend_selection_env():
    code = "from shorfluct import kernels; print(kernels.BACKEND)"
    pure = subprocess.run(
        [sys.executable, "-c", code], env=dict(os.environ, SHORFLUCT_PURE="1"), capture_output=True, text=True
    )
    assert pure.stdout.strip() == "numpy"
    default = subprocess.run(
        [sys.executable, "-c", code], env=dict(os.environ, SHORFLUCT_PURE="0"), capture_output=True, text=True
    )
    assert default.stdout.strip() == "cython"
