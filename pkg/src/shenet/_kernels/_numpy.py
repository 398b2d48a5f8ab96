"""Pure-numpy reference kernels.

Always importable; used when numba is missing or disabled through
``SHENET_DISABLE_NUMBA``.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def im2col(xp, k, stride, ho, wo):
    """Patches of a padded batch ``(N, C, Hp, Wp)`` laid out as ``(C, k, k, N, ho, wo)``."""
    n, c = xp.shape[:2]
    cols = np.empty((c, k, k, n, ho, wo), dtype=xp.dtype)
    src = xp.transpose(1, 0, 2, 3)
    for i in range(k):
        for j in range(k):
            cols[:, i, j] = src[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride]
    return cols


def col2im(cols, hp, wp, stride):
    """Scatter-add adjoint of :func:`im2col`; returns ``(N, C, hp, wp)``."""
    c, k, _, n, ho, wo = cols.shape
    out = np.zeros((c, n, hp, wp), dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride] += cols[:, i, j]
    return out.transpose(1, 0, 2, 3)


def maxpool_forward(x, w):
    n, c, h, wd = x.shape
    blocks = x.reshape(n, c, h // w, w, wd // w, w).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, c, h // w, wd // w, w * w)
    # argmax picks the first occurrence on ties
    idx = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool_backward(g, idx, w):
    n, c, ho, wo = g.shape
    blocks = np.zeros((n, c, ho, wo, w * w), dtype=g.dtype)
    np.put_along_axis(blocks, idx[..., None], g[..., None], axis=-1)
    return blocks.reshape(n, c, ho, wo, w, w).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * w, wo * w)


def ncc_scores(moving, fixed, max_shift):
    """NCC of ``moving`` translated by every (dz, dx) in the search box.

    ``scores[dz + m, dx + m]`` compares ``fixed[r, c]`` with ``moving[r - dz, c - dx]``
    over their overlap. Undefined correlations (flat overlap) are ``-inf``.
    """
    h, w = fixed.shape
    m = max_shift
    scores = np.full((2 * m + 1, 2 * m + 1), -np.inf)
    for dz in range(-m, m + 1):
        r0, r1 = max(0, dz), min(h, h + dz)
        for dx in range(-m, m + 1):
            c0, c1 = max(0, dx), min(w, w + dx)
            a = fixed[r0:r1, c0:c1]
            b = moving[r0 - dz : r1 - dz, c0 - dx : c1 - dx]
            a = a - a.mean()
            b = b - b.mean()
            den = np.sqrt((a * a).sum() * (b * b).sum())
            if den > 0:
                scores[dz + m, dx + m] = (a * b).sum() / den
    return scores


def shift_columns(img, shifts):
    """Shift column ``c`` of ``img`` down by ``shifts[c]`` rows, zero fill."""
    h, w = img.shape
    rows = np.arange(h)[:, None] - shifts[None, :]
    valid = (rows >= 0) & (rows < h)
    out = np.zeros_like(img)
    cols = np.broadcast_to(np.arange(w)[None, :], (h, w))
    out[valid] = img[rows[valid], cols[valid]]
    return out
