"""numba-compiled versions of the kernels in ``_numpy``.

Same signatures and results; loops are written out so the JIT can fuse them.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def im2col(xp, k, stride, ho, wo):
    n, c = xp.shape[0], xp.shape[1]
    out = np.empty((c, k, k, n, ho, wo), dtype=xp.dtype)
    for ch in range(c):
        for i in range(k):
            for j in range(k):
                for b in range(n):
                    for y in range(ho):
                        row = y * stride + i
                        for x in range(wo):
                            out[ch, i, j, b, y, x] = xp[b, ch, row, x * stride + j]
    return out


@njit(cache=True)
def col2im(cols, hp, wp, stride):
    c, k, n, ho, wo = cols.shape[0], cols.shape[1], cols.shape[3], cols.shape[4], cols.shape[5]
    out = np.zeros((n, c, hp, wp), dtype=cols.dtype)
    for ch in range(c):
        for i in range(k):
            for j in range(k):
                for b in range(n):
                    for y in range(ho):
                        row = y * stride + i
                        for x in range(wo):
                            out[b, ch, row, x * stride + j] += cols[ch, i, j, b, y, x]
    return out


@njit(cache=True)
def maxpool_forward(x, w):
    n, c, h, wd = x.shape
    ho, wo = h // w, wd // w
    out = np.empty((n, c, ho, wo), dtype=x.dtype)
    idx = np.empty((n, c, ho, wo), dtype=np.int64)
    for b in range(n):
        for ch in range(c):
            for y in range(ho):
                for xx in range(wo):
                    best = x[b, ch, y * w, xx * w]
                    arg = 0
                    for i in range(w):
                        for j in range(w):
                            v = x[b, ch, y * w + i, xx * w + j]
                            if v > best:
                                best = v
                                arg = i * w + j
                    out[b, ch, y, xx] = best
                    idx[b, ch, y, xx] = arg
    return out, idx


@njit(cache=True)
def maxpool_backward(g, idx, w):
    n, c, ho, wo = g.shape
    out = np.zeros((n, c, ho * w, wo * w), dtype=g.dtype)
    for b in range(n):
        for ch in range(c):
            for y in range(ho):
                for xx in range(wo):
                    a = idx[b, ch, y, xx]
                    out[b, ch, y * w + a // w, xx * w + a % w] = g[b, ch, y, xx]
    return out


@njit(cache=True)
def ncc_scores(moving, fixed, max_shift):
    h, w = fixed.shape
    m = max_shift
    scores = np.full((2 * m + 1, 2 * m + 1), -np.inf)
    for dz in range(-m, m + 1):
        r0, r1 = max(0, dz), min(h, h + dz)
        for dx in range(-m, m + 1):
            c0, c1 = max(0, dx), min(w, w + dx)
            cnt = (r1 - r0) * (c1 - c0)
            if cnt <= 0:
                continue
            sa = 0.0
            sb = 0.0
            for r in range(r0, r1):
                for cc in range(c0, c1):
                    sa += fixed[r, cc]
                    sb += moving[r - dz, cc - dx]
            ma = sa / cnt
            mb = sb / cnt
            sab = 0.0
            saa = 0.0
            sbb = 0.0
            for r in range(r0, r1):
                for cc in range(c0, c1):
                    a = fixed[r, cc] - ma
                    bb = moving[r - dz, cc - dx] - mb
                    sab += a * bb
                    saa += a * a
                    sbb += bb * bb
            den = np.sqrt(saa * sbb)
            if den > 0:
                scores[dz + m, dx + m] = sab / den
    return scores


@njit(cache=True)
def shift_columns(img, shifts):
    h, w = img.shape
    out = np.zeros_like(img)
    for c in range(w):
        s = shifts[c]
        for r in range(h):
            src = r - s
            if 0 <= src < h:
                out[r, c] = img[src, c]
    return out
