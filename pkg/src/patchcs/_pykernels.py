"""Pure-numpy versions of the convolution gather/scatter kernels.

Results are bit-identical to the compiled kernels: ``im2col`` is a pure copy
and ``col2im_add`` accumulates kernel offsets in the same (i, j) order.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def im2col(xp, k, row0, row1):
    B, C, _, Wp = xp.shape
    W = Wp - k + 1
    R = row1 - row0
    band = xp[:, :, row0 : row1 + k - 1, :]
    win = sliding_window_view(band, (k, k), axis=(2, 3))  # (B, C, R, W, k, k)
    return np.ascontiguousarray(win.transpose(1, 4, 5, 0, 2, 3)).reshape(C * k * k, B * R * W)


def col2im_add(col, dxp, k, row0, row1):
    B, C, _, Wp = dxp.shape
    W = Wp - k + 1
    R = row1 - row0
    blocks = col.reshape(C, k, k, B, R, W)
    for i in range(k):
        for j in range(k):
            dxp[:, :, row0 + i : row1 + i, j : j + W] += blocks[:, i, j].transpose(1, 0, 2, 3)


def shift_sum(z, out):
    _, k, _, _, Hp, Wp = z.shape
    H, W = out.shape[2:]
    for i in range(k):
        for j in range(k):
            out += z[:, i, j, :, i : i + H, j : j + W]


def shift_spread(g, dz):
    k = dz.shape[1]
    H, W = g.shape[2:]
    for i in range(k):
        for j in range(k):
            dz[:, i, j, :, i : i + H, j : j + W] = g
