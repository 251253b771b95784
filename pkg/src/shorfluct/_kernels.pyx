# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled amplitude kernels.

Every kernel works on a C-contiguous ``complex128`` array of shape ``(B, D)``
with ``D`` a power of two; row ``b`` is an independent amplitude vector and
bit ``q`` of the column index is qubit ``q + 1``.  The pure-NumPy twin lives
in ``_kernels_py`` and must stay result-identical.

Inner loops run on the interleaved real/imaginary doubles so the compiler
sees plain floating-point arithmetic.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _rotate_pairs(
    double* p, Py_ssize_t D, Py_ssize_t m,
    double ar, double ai, double br, double bi,
    double cr, double ci, double dr, double di,
) noexcept nogil:
    # [p0, p1] <- [[a, b], [c, d]] @ [p0, p1] for every pair split by bit m
    cdef Py_ssize_t blk, lo, i0, i1
    cdef Py_ssize_t nblk = D // (2 * m)
    cdef double xr, xi, yr, yi
    for blk in range(nblk):
        for lo in range(m):
            i0 = 2 * (2 * m * blk + lo)
            i1 = i0 + 2 * m
            xr = p[i0]
            xi = p[i0 + 1]
            yr = p[i1]
            yi = p[i1 + 1]
            p[i0] = ar * xr - ai * xi + br * yr - bi * yi
            p[i0 + 1] = ar * xi + ai * xr + br * yi + bi * yr
            p[i1] = cr * xr - ci * xi + dr * yr - di * yi
            p[i1 + 1] = cr * xi + ci * xr + dr * yi + di * yr


def apply_1q(double complex[:, ::1] psi, int q, u):
    cdef Py_ssize_t B = psi.shape[0], D = psi.shape[1]
    cdef Py_ssize_t m = (<Py_ssize_t>1) << q
    cdef double complex u00 = u[0][0], u01 = u[0][1], u10 = u[1][0], u11 = u[1][1]
    cdef Py_ssize_t b
    if D == 0:
        return
    with nogil:
        for b in range(B):
            _rotate_pairs(
                <double*> &psi[b, 0], D, m,
                u00.real, u00.imag, u01.real, u01.imag,
                u10.real, u10.imag, u11.real, u11.imag,
            )


def apply_hadamard(double complex[:, ::1] psi, int q):
    cdef Py_ssize_t B = psi.shape[0], D = psi.shape[1]
    cdef Py_ssize_t m = (<Py_ssize_t>1) << q
    cdef double s = 0.7071067811865475244
    cdef Py_ssize_t nblk = D // (2 * m)
    cdef Py_ssize_t b, blk, lo, i0, i1
    cdef double xr, xi, yr, yi
    cdef double* p
    if D == 0:
        return
    with nogil:
        for b in range(B):
            p = <double*> &psi[b, 0]
            for blk in range(nblk):
                for lo in range(m):
                    i0 = 2 * (2 * m * blk + lo)
                    i1 = i0 + 2 * m
                    xr = p[i0]
                    xi = p[i0 + 1]
                    yr = p[i1]
                    yi = p[i1 + 1]
                    p[i0] = (xr + yr) * s
                    p[i0 + 1] = (xi + yi) * s
                    p[i1] = (xr - yr) * s
                    p[i1 + 1] = (xi - yi) * s


def apply_phase_mask(double complex[:, ::1] psi, Py_ssize_t mask, double complex phase):
    cdef Py_ssize_t B = psi.shape[0], D = psi.shape[1]
    cdef Py_ssize_t b, i
    cdef double pr = phase.real, pi = phase.imag, xr, xi
    cdef double* p
    if D == 0:
        return
    with nogil:
        for b in range(B):
            p = <double*> &psi[b, 0]
            for i in range(D):
                if (i & mask) == mask:
                    xr = p[2 * i]
                    xi = p[2 * i + 1]
                    p[2 * i] = pr * xr - pi * xi
                    p[2 * i + 1] = pr * xi + pi * xr


def gather_columns(const double complex[:, ::1] psi, const cnp.intp_t[::1] src):
    cdef Py_ssize_t B = psi.shape[0], D = psi.shape[1]
    out = np.empty((B, D), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t b, i
    with nogil:
        for b in range(B):
            for i in range(D):
                o[b, i] = psi[b, src[i]]
    return out


def roll_rows_masked(double complex[:, ::1] psi, int q, Py_ssize_t shift):
    cdef Py_ssize_t R = psi.shape[0], D = psi.shape[1]
    cdef Py_ssize_t m = (<Py_ssize_t>1) << q
    cdef Py_ssize_t j, i
    tmp = np.empty(R, dtype=np.complex128)
    cdef double complex[::1] t = tmp
    shift = ((shift % R) + R) % R
    if shift == 0:
        return
    with nogil:
        for i in range(D):
            if i & m:
                for j in range(R):
                    t[(j + shift) % R] = psi[j, i]
                for j in range(R):
                    psi[j, i] = t[j]


cdef inline void _pair_accumulate(
    const double* p, double* o, Py_ssize_t start, Py_ssize_t length,
    int q, double wr, double wi, int alpha,
) noexcept nogil:
    # o += w sigma_alpha(q) p over [start, start + length)
    cdef Py_ssize_t m = (<Py_ssize_t>1) << q
    cdef Py_ssize_t nblk = length // (2 * m)
    cdef Py_ssize_t blk, lo, i0, i1
    cdef double xr, xi, yr, yi
    if alpha == 0:
        for blk in range(nblk):
            for lo in range(m):
                i0 = 2 * (start + 2 * m * blk + lo)
                i1 = i0 + 2 * m
                xr = p[i0]
                xi = p[i0 + 1]
                yr = p[i1]
                yi = p[i1 + 1]
                o[i0] += wr * yr - wi * yi
                o[i0 + 1] += wr * yi + wi * yr
                o[i1] += wr * xr - wi * xi
                o[i1 + 1] += wr * xi + wi * xr
    else:
        # sigma_y: |0> -> i|1>, |1> -> -i|0>
        for blk in range(nblk):
            for lo in range(m):
                i0 = 2 * (start + 2 * m * blk + lo)
                i1 = i0 + 2 * m
                xr = p[i0]
                xi = p[i0 + 1]
                yr = p[i1]
                yi = p[i1 + 1]
                o[i0] += wr * yi + wi * yr
                o[i0 + 1] += wi * yi - wr * yr
                o[i1] -= wr * xi + wi * xr
                o[i1 + 1] += wr * xr - wi * xi


def pauli_sum(const double complex[:, ::1] psi, int q0, int q1, int alpha, weights):
    """Return ``sum_q w_q sigma_alpha(q) psi`` over qubits ``q0 <= q < q1``.

    ``alpha`` is 0, 1, 2 for x, y, z.
    """
    cdef Py_ssize_t B = psi.shape[0], D = psi.shape[1]
    cdef int nq = q1 - q0
    w_arr = np.ascontiguousarray(weights, dtype=np.complex128)
    cdef double complex[::1] w = w_arr
    out = np.zeros((B, D), dtype=np.complex128)
    if D == 0 or nq <= 0:
        return out
    cdef double complex[:, ::1] o = out
    cdef Py_ssize_t b, i, j, t, t0, tile, smask
    cdef double* sl
    cdef int k, tq
    cdef double sr, si
    cdef const double* p
    cdef double* po
    sl_arr = np.empty(2 << nq if alpha == 2 else 2, dtype=np.float64)
    cdef double[::1] slv = sl_arr
    sl = &slv[0]
    with nogil:
        if alpha == 2:
            # sign sums for every bit pattern of the scope, built by doubling
            sl[0] = 0
            sl[1] = 0
            for k in range(nq):
                sl[0] += w[k].real
                sl[1] += w[k].imag
            for k in range(nq):
                for i in range((<Py_ssize_t>1) << k):
                    j = i + ((<Py_ssize_t>1) << k)
                    sl[2 * j] = sl[2 * i] - 2 * w[k].real
                    sl[2 * j + 1] = sl[2 * i + 1] - 2 * w[k].imag
            smask = ((<Py_ssize_t>1) << nq) - 1
            for b in range(B):
                p = <const double*> &psi[b, 0]
                po = <double*> &o[b, 0]
                for i in range(D):
                    j = (i >> q0) & smask
                    sr = sl[2 * j]
                    si = sl[2 * j + 1]
                    po[2 * i] = sr * p[2 * i] - si * p[2 * i + 1]
                    po[2 * i + 1] = sr * p[2 * i + 1] + si * p[2 * i]
        else:
            # qubits below ``tq`` are handled tile by tile so the tile stays in cache
            tq = 14 if q1 > 14 else q1
            tile = (<Py_ssize_t>1) << tq
            if tile > D:
                tile = D
            for b in range(B):
                p = <const double*> &psi[b, 0]
                po = <double*> &o[b, 0]
                for t in range(D // tile):
                    t0 = t * tile
                    for k in range(nq):
                        if q0 + k >= tq:
                            break
                        _pair_accumulate(p, po, t0, tile, q0 + k, w[k].real, w[k].imag, alpha)
                for k in range(nq):
                    if q0 + k >= tq:
                        _pair_accumulate(p, po, 0, D, q0 + k, w[k].real, w[k].imag, alpha)
    return out
