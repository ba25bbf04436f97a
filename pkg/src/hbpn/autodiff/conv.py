"""im2col / col2im convolution kernels.

Column buffers are laid out ``(c, k, k, n, oh, ow)`` so that both the forward
product and the input-gradient scatter are single BLAS calls followed by
``k*k`` strided slice updates.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def conv_out_size(size: int, k: int, s: int, p: int) -> int:
    return (size + 2 * p - k) // s + 1


def conv_transpose_out_size(size: int, k: int, s: int, p: int) -> int:
    return (size - 1) * s - 2 * p + k


def _pad(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))


def im2col(x: np.ndarray, k: int, s: int, p: int) -> tuple[np.ndarray, int, int]:
    """Return a ``(c*k*k, n*oh*ow)`` column matrix for ``x`` of shape (n, c, h, w)."""
    n, c, h, w = x.shape
    if k == 1 and s == 1 and p == 0:
        return np.ascontiguousarray(x.transpose(1, 0, 2, 3)).reshape(c, n * h * w), h, w
    oh, ow = conv_out_size(h, k, s, p), conv_out_size(w, k, s, p)
    xp = _pad(x, p)
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s][:, :, :oh, :ow]
    cols = np.ascontiguousarray(win.transpose(1, 4, 5, 0, 2, 3))
    return cols.reshape(c * k * k, n * oh * ow), oh, ow


def col2im(cols: np.ndarray, n: int, c: int, h: int, w: int, k: int, s: int, p: int) -> np.ndarray:
    """Adjoint of :func:`im2col`: scatter-add columns back onto an (n, c, h, w) grid."""
    if k == 1 and s == 1 and p == 0:
        return np.ascontiguousarray(cols.reshape(c, n, h, w).transpose(1, 0, 2, 3))
    oh, ow = conv_out_size(h, k, s, p), conv_out_size(w, k, s, p)
    cols = cols.reshape(c, k, k, n, oh, ow)
    hp, wp = h + 2 * p, w + 2 * p
    out = np.zeros((c, n, hp, wp), dtype=cols.dtype)
    for i in range(k):
        hi = i + s * (oh - 1) + 1
        for j in range(k):
            out[:, :, i:hi:s, j:j + s * (ow - 1) + 1:s] += cols[:, i, j]
    out = out[:, :, p:p + h, p:p + w]
    return np.ascontiguousarray(out.transpose(1, 0, 2, 3))


def conv2d_forward(x, weight, bias, s, p):
    """Direct convolution.  ``weight`` is (out, in, k, k).  Returns (y, cols)."""
    n = x.shape[0]
    o, _, k, _ = weight.shape
    cols, oh, ow = im2col(x, k, s, p)
    y = weight.reshape(o, -1) @ cols
    y = y.reshape(o, n, oh, ow).transpose(1, 0, 2, 3)
    if bias is not None:
        y = y + bias.reshape(1, o, 1, 1)
    return np.ascontiguousarray(y), cols


def conv2d_backward(gy, x_shape, weight, cols, s, p, need_x=True):
    n, c, h, w = x_shape
    o, _, k, _ = weight.shape
    gmat = np.ascontiguousarray(gy.transpose(1, 0, 2, 3)).reshape(o, -1)
    gw = (gmat @ cols.T).reshape(weight.shape)
    gb = gmat.sum(axis=1)
    gx = None
    if need_x:
        gcols = weight.reshape(o, -1).T @ gmat
        gx = col2im(gcols, n, c, h, w, k, s, p)
    return gx, gw, gb


def conv_transpose2d_forward(x, weight, bias, s, p):
    """Transposed convolution.  ``weight`` is (in, out, k, k).  Returns (y, xmat)."""
    n, ci, h, w = x.shape
    _, co, k, _ = weight.shape
    oh, ow = conv_transpose_out_size(h, k, s, p), conv_transpose_out_size(w, k, s, p)
    xmat = np.ascontiguousarray(x.transpose(1, 0, 2, 3)).reshape(ci, -1)
    cols = weight.reshape(ci, -1).T @ xmat
    y = col2im(cols, n, co, oh, ow, k, s, p)
    if bias is not None:
        y += bias.reshape(1, co, 1, 1)
    return y, xmat


def conv_transpose2d_backward(gy, x_shape, weight, xmat, s, p, need_x=True):
    n, ci, h, w = x_shape
    _, co, k, _ = weight.shape
    gcols, gh, gw_ = im2col(gy, k, s, p)
    assert (gh, gw_) == (h, w)
    gw = (xmat @ gcols.T).reshape(weight.shape)
    gb = gy.sum(axis=(0, 2, 3))
    gx = None
    if need_x:
        gx = (weight.reshape(ci, -1) @ gcols).reshape(ci, n, h, w).transpose(1, 0, 2, 3)
        gx = np.ascontiguousarray(gx)
    return gx, gw, gb
