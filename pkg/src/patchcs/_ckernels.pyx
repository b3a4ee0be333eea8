# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled gather/scatter kernels for same-padded stride-1 convolution.

im2col/col2im_add work on a zero-padded input of shape
(B, C, H + k - 1, W + k - 1) and a band of output rows [row0, row1). Column
matrices are laid out as (C * k * k, B * rows * W) so that
``weights.reshape(O, -1) @ col`` yields the output in (O, B, rows, W) order.

shift_sum/shift_spread serve the channel-contraction path, where per-offset
responses z of shape (O, k, k, B, H + k - 1, W + k - 1) are summed with shifts.

Every pixel accumulates kernel offsets in (i, j) ascending order, matching
the numpy fallback bit for bit; loops are ordered so the row being written
stays in cache across offsets.
"""
import numpy as np
from libc.string cimport memcpy


def im2col(const double[:, :, :, ::1] xp, int k, Py_ssize_t row0, Py_ssize_t row1):
    cdef Py_ssize_t B = xp.shape[0], C = xp.shape[1], Hp = xp.shape[2], Wp = xp.shape[3]
    cdef Py_ssize_t W = Wp - k + 1
    cdef Py_ssize_t R = row1 - row0
    cdef Py_ssize_t N = B * R * W
    out = np.empty((C * k * k, N), dtype=np.float64)
    cdef double[:, ::1] col = out
    cdef double* dst = &col[0, 0] if col.shape[0] * N > 0 else NULL
    cdef const double* src = &xp[0, 0, 0, 0] if xp.size > 0 else NULL
    cdef const double* plane
    cdef Py_ssize_t c, i, j, b, y, r
    cdef size_t nbytes = W * sizeof(double)
    if dst == NULL or src == NULL:
        return out
    with nogil:
        for c in range(C):
            for b in range(B):
                plane = src + (b * C + c) * Hp * Wp
                for i in range(k):
                    for j in range(k):
                        r = (c * k + i) * k + j
                        for y in range(R):
                            memcpy(dst + r * N + (b * R + y) * W, plane + (row0 + y + i) * Wp + j, nbytes)
    return out


def col2im_add(const double[:, ::1] col, double[:, :, :, ::1] dxp, int k,
               Py_ssize_t row0, Py_ssize_t row1):
    """Scatter-add a column matrix back into the padded gradient buffer."""
    cdef Py_ssize_t B = dxp.shape[0], C = dxp.shape[1], Hp = dxp.shape[2], Wp = dxp.shape[3]
    cdef Py_ssize_t W = Wp - k + 1
    cdef Py_ssize_t R = row1 - row0
    cdef Py_ssize_t N = B * R * W
    if col.shape[0] * N == 0 or dxp.size == 0:
        return
    cdef const double* src = &col[0, 0]
    cdef double* dst = &dxp[0, 0, 0, 0]
    cdef double* plane
    cdef double* drow
    cdef const double* srow
    cdef Py_ssize_t c, i, j, b, y, x, r
    with nogil:
        for c in range(C):
            for b in range(B):
                plane = dst + (b * C + c) * Hp * Wp
                for i in range(k):
                    for j in range(k):
                        r = (c * k + i) * k + j
                        for y in range(R):
                            drow = plane + (row0 + y + i) * Wp + j
                            srow = src + r * N + (b * R + y) * W
                            for x in range(W):
                                drow[x] += srow[x]


def shift_sum(const double[:, :, :, :, :, ::1] z, double[:, :, :, ::1] out):
    """out[o, b, y, x] += sum over (i, j) of z[o, i, j, b, y + i, x + j]."""
    cdef Py_ssize_t O = z.shape[0], k = z.shape[1], B = z.shape[3]
    cdef Py_ssize_t Hp = z.shape[4], Wp = z.shape[5]
    cdef Py_ssize_t H = out.shape[2], W = out.shape[3]
    if z.size == 0 or out.size == 0:
        return
    cdef const double* zp = &z[0, 0, 0, 0, 0, 0]
    cdef double* op = &out[0, 0, 0, 0]
    cdef Py_ssize_t plane = Hp * Wp
    cdef Py_ssize_t o, i, j, b, y, x
    cdef double* orow
    cdef const double* zrow
    with nogil:
        for o in range(O):
            for b in range(B):
                for y in range(H):
                    orow = op + ((o * B + b) * H + y) * W
                    for i in range(k):
                        for j in range(k):
                            zrow = zp + (((o * k + i) * k + j) * B + b) * plane + (y + i) * Wp + j
                            for x in range(W):
                                orow[x] += zrow[x]


def shift_spread(const double[:, :, :, ::1] g, double[:, :, :, :, :, ::1] dz):
    """Adjoint of shift_sum: dz[o, i, j, b, y + i, x + j] = g[o, b, y, x]; dz starts zeroed."""
    cdef Py_ssize_t O = dz.shape[0], k = dz.shape[1], B = dz.shape[3]
    cdef Py_ssize_t Hp = dz.shape[4], Wp = dz.shape[5]
    cdef Py_ssize_t H = g.shape[2], W = g.shape[3]
    if g.size == 0 or dz.size == 0:
        return
    cdef const double* gp = &g[0, 0, 0, 0]
    cdef double* dp = &dz[0, 0, 0, 0, 0, 0]
    cdef Py_ssize_t plane = Hp * Wp
    cdef size_t nbytes = W * sizeof(double)
    cdef Py_ssize_t o, i, j, b, y
    with nogil:
        for o in range(O):
            for i in range(k):
                for j in range(k):
                    for b in range(B):
                        for y in range(H):
                            memcpy(dp + (((o * k + i) * k + j) * B + b) * plane + (y + i) * Wp + j,
                                   gp + ((o * B + b) * H + y) * W, nbytes)
