"""Pure-NumPy fallback for the compiled kernels in ``_kernels.pyx``.

Same signatures, same in-place semantics.  Used when the extension is not
built or when ``SHORFLUCT_PURE=1`` is set.
"""

import numpy as np

_SQRT_HALF = 0.7071067811865475244


def _split(psi, q):
    m = 1 << q
    return psi.reshape(psi.shape[0], -1, 2, m), m


def apply_1q(psi, q, u):
    v, _ = _split(psi, q)
    a0 = v[:, :, 0, :].copy()
    a1 = v[:, :, 1, :]
    v[:, :, 0, :] = u[0][0] * a0 + u[0][1] * a1
    v[:, :, 1, :] = u[1][0] * a0 + u[1][1] * a1


def apply_hadamard(psi, q):
    v, _ = _split(psi, q)
    a0 = v[:, :, 0, :].copy()
    a1 = v[:, :, 1, :]
    v[:, :, 0, :] = (a0 + a1) * _SQRT_HALF
    v[:, :, 1, :] = (a0 - a1) * _SQRT_HALF


def apply_phase_mask(psi, mask, phase):
    idx = np.arange(psi.shape[1])
    sel = (idx & mask) == mask
    psi[:, sel] *= phase


def gather_columns(psi, src):
    return np.ascontiguousarray(psi[:, src])


def roll_rows_masked(psi, q, shift):
    r = psi.shape[0]
    shift %= r
    if shift == 0:
        return
    sel = (np.arange(psi.shape[1]) >> q) & 1 == 1
    psi[:, sel] = np.roll(psi[:, sel], shift, axis=0)


def pauli_sum(psi, q0, q1, alpha, weights):
    out = np.zeros_like(psi)
    for k, q in enumerate(range(q0, q1)):
        v, _ = _split(psi, q)
        o = out.reshape(v.shape)
        w = weights[k]
        if alpha == 0:
            o[:, :, 0, :] += w * v[:, :, 1, :]
            o[:, :, 1, :] += w * v[:, :, 0, :]
        elif alpha == 1:
            o[:, :, 0, :] += -1j * w * v[:, :, 1, :]
            o[:, :, 1, :] += 1j * w * v[:, :, 0, :]
        else:
            o[:, :, 0, :] += w * v[:, :, 0, :]
            o[:, :, 1, :] -= w * v[:, :, 1, :]
    return out
