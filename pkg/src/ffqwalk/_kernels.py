"""Compiled multi-step stencils for the lattice engines.

Buffers are double-buffered: ``buf[c]`` is the live state and ``buf[1 - c]``
the write target. A walker buffer has rows (Re a, Im a, Re b, Im b), a Markov
buffer rows (L, R). Every entry outside the live window is exactly zero; the
target's previous window (``stale_lo..stale_hi``) is cleared before each write
so that invariant survives trimming.

Inner loops index offset slice views with a non-negative counter so LLVM can
vectorise them (a raw ``j - 1`` index pulls in the wraparound check).

No fastmath: the per-step arithmetic must not depend on how many steps a call
covers, or checkpoint resume stops being bit-identical.
"""

import numpy as np
from numba import njit

MODE_FEED_FORWARD = 0
MODE_CONSTANT = 1

# rounding noise tolerated below zero in the Markov update
MARKOV_NEG_TOL = 1e-15


@njit(cache=True)
def _trim_walk(dst, lo, hi, eps, trunc):
    while lo < hi:
        p = (dst[0, lo] * dst[0, lo] + dst[1, lo] * dst[1, lo]
             + dst[2, lo] * dst[2, lo] + dst[3, lo] * dst[3, lo])
        if p >= eps or p != p:
            break
        trunc += p
        dst[:, lo] = 0.0
        lo += 1
    while hi > lo:
        p = (dst[0, hi] * dst[0, hi] + dst[1, hi] * dst[1, hi]
             + dst[2, hi] * dst[2, hi] + dst[3, hi] * dst[3, hi])
        if p >= eps or p != p:
            break
        trunc += p
        dst[:, hi] = 0.0
        hi -= 1
    return lo, hi, trunc


@njit(cache=True)
def walk_advance(buf, cur, lo, hi, stale_lo, stale_hi, nsteps, eps, trunc,
                 mode, gc_r, gc_i, s_c):
    """Advance a walker buffer ``nsteps`` steps.

    ``mode`` selects the feed-forward rate or the constant coin
    ``(gc_r + i gc_i, s_c)``. Returns ``(cur, lo, hi, stale_lo, stale_hi, trunc)``.
    """
    for _ in range(nsteps):
        src = buf[cur]
        dst = buf[1 - cur]
        dst[:, stale_lo:stale_hi + 1] = 0.0
        # targets of the update that no source writes
        dst[0, hi:hi + 2] = 0.0
        dst[1, hi:hi + 2] = 0.0
        dst[2, lo - 1:lo + 1] = 0.0
        dst[3, lo - 1:lo + 1] = 0.0

        n = hi - lo + 1
        am_r = src[0, lo - 1:hi]
        am_i = src[1, lo - 1:hi]
        bp_r = src[2, lo + 1:hi + 2]
        bp_i = src[3, lo + 1:hi + 2]
        a_r = src[0, lo:hi + 1]
        a_i = src[1, lo:hi + 1]
        b_r = src[2, lo:hi + 1]
        b_i = src[3, lo:hi + 1]
        out_ar = dst[0, lo - 1:hi]
        out_ai = dst[1, lo - 1:hi]
        out_br = dst[2, lo + 1:hi + 2]
        out_bi = dst[3, lo + 1:hi + 2]
        if mode == MODE_FEED_FORWARD:
            for k in range(n):
                pa = am_r[k] * am_r[k] + am_i[k] * am_i[k]
                pb = bp_r[k] * bp_r[k] + bp_i[k] * bp_i[k]
                g2 = min(pa + pb, 1.0)
                gr = np.sqrt(pa)
                gi = np.sqrt(pb)
                s = np.sqrt(1.0 - g2)
                ar = a_r[k]
                ai = a_i[k]
                br = b_r[k]
                bi = b_i[k]
                # a'_{j-1} = g a - s b ;  b'_{j+1} = s a + conj(g) b
                out_ar[k] = gr * ar - gi * ai - s * br
                out_ai[k] = gr * ai + gi * ar - s * bi
                out_br[k] = s * ar + gr * br + gi * bi
                out_bi[k] = s * ai + gr * bi - gi * br
        else:
            gr = gc_r
            gi = gc_i
            s = s_c
            for k in range(n):
                ar = a_r[k]
                ai = a_i[k]
                br = b_r[k]
                bi = b_i[k]
                out_ar[k] = gr * ar - gi * ai - s * br
                out_ai[k] = gr * ai + gi * ar - s * bi
                out_br[k] = s * ar + gr * br + gi * bi
                out_bi[k] = s * ai + gr * bi - gi * br
        stale_lo = lo
        stale_hi = hi
        lo, hi, trunc = _trim_walk(dst, lo - 1, hi + 1, eps, trunc)
        cur = 1 - cur
    return cur, lo, hi, stale_lo, stale_hi, trunc


@njit(cache=True)
def _trim_markov(dst, lo, hi, eps, trunc):
    while lo < hi:
        p = dst[0, lo] + dst[1, lo]
        if p >= eps:
            break
        trunc += p
        dst[:, lo] = 0.0
        lo += 1
    while hi > lo:
        p = dst[0, hi] + dst[1, hi]
        if p >= eps:
            break
        trunc += p
        dst[:, hi] = 0.0
        hi -= 1
    return lo, hi, trunc


@njit(cache=True)
def markov_advance(buf, cur, lo, hi, stale_lo, stale_hi, nsteps, eps, trunc):
    """Returns ``(cur, lo, hi, stale_lo, stale_hi, trunc, bad_site, bad_value, ok)``.

    On a model violation the buffers are left mid-step and ``ok`` is False;
    ``bad_site`` is the buffer index of the offending target.
    """
    for _ in range(nsteps):
        src = buf[cur]
        dst = buf[1 - cur]
        dst[:, stale_lo:stale_hi + 1] = 0.0
        dst[0, hi:hi + 2] = 0.0
        dst[1, lo - 1:lo + 1] = 0.0

        n = hi - lo + 1
        l_left = src[0, lo - 1:hi]
        r_right = src[1, lo + 1:hi + 2]
        l_here = src[0, lo:hi + 1]
        r_here = src[1, lo:hi + 1]
        out_l = dst[0, lo - 1:hi]
        out_r = dst[1, lo + 1:hi + 2]
        worst = 0.0
        for k in range(n):
            total = r_here[k] + l_here[k]
            diff = r_here[k] - l_here[k]
            c = 2.0 * (l_left[k] + r_right[k]) - 1.0
            new_r = 0.5 * (total + c * diff)
            new_l = 0.5 * (total - c * diff)
            worst = min(worst, new_r, new_l)
            out_r[k] = max(new_r, 0.0)
            out_l[k] = max(new_l, 0.0)
        if worst < -MARKOV_NEG_TOL:
            for k in range(n):
                total = r_here[k] + l_here[k]
                diff = r_here[k] - l_here[k]
                c = 2.0 * (l_left[k] + r_right[k]) - 1.0
                new_r = 0.5 * (total + c * diff)
                new_l = 0.5 * (total - c * diff)
                if new_r < -MARKOV_NEG_TOL:
                    return cur, lo, hi, stale_lo, stale_hi, trunc, lo + k + 1, new_r, False
                if new_l < -MARKOV_NEG_TOL:
                    return cur, lo, hi, stale_lo, stale_hi, trunc, lo + k - 1, new_l, False
        stale_lo = lo
        stale_hi = hi
        lo, hi, trunc = _trim_markov(dst, lo - 1, hi + 1, eps, trunc)
        cur = 1 - cur
    return cur, lo, hi, stale_lo, stale_hi, trunc, 0, 0.0, True
