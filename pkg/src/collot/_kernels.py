"""Compiled inner loops for the pairwise L^p cost.

Every kernel reads a ``(K, N_p, n)`` point array and a ``(K, N_p)`` index
array. None of them allocate, so heap accounting done from Python sees
every buffer the solvers use.
"""

import numba
import numpy as np

_jit = numba.njit(cache=True, nogil=True)


@_jit
def dist_p(points, l, rl, k, rk, p):
    s = 0.0
    for d in range(points.shape[2]):
        diff = abs(points[l, rl, d] - points[k, rk, d])
        if p == 2.0:
            s += diff * diff
        elif p == 1.0:
            s += diff
        else:
            s += diff ** p
    return s


@_jit
def tuple_cost_at(points, perms, r, p, w):
    K = points.shape[0]
    s = 0.0
    for i in range(K):
        for j in range(i + 1, K):
            s += dist_p(points, i, perms[i, r], j, perms[j, r], p)
    return w * s


@_jit
def total_cost(points, perms, p, w):
    s = 0.0
    for r in range(perms.shape[1]):
        s += tuple_cost_at(points, perms, r, p, w)
    return s


@_jit
def swap_delta(points, perms, k, a, b, p, w):
    ak = perms[k, a]
    bk = perms[k, b]
    s = 0.0
    for l in range(points.shape[0]):
        if l == k:
            continue
        al = perms[l, a]
        bl = perms[l, b]
        s += (dist_p(points, l, al, k, bk, p) + dist_p(points, l, bl, k, ak, p)
              - dist_p(points, l, al, k, ak, p) - dist_p(points, l, bl, k, bk, p))
    return w * s


@_jit
def pair_deltas(points, perms, k, I, J, p, w, out):
    for m in range(I.shape[0]):
        out[m] = swap_delta(points, perms, k, I[m], J[m], p, w)


@_jit
def apply_swaps(perms, k, I, J, deltas):
    """Apply every strictly negative delta in plan order."""
    accepted = 0
    gain = 0.0
    for m in range(I.shape[0]):
        if deltas[m] < 0.0:
            a = I[m]
            b = J[m]
            t = perms[k, a]
            perms[k, a] = perms[k, b]
            perms[k, b] = t
            accepted += 1
            gain += deltas[m]
    return accepted, gain


@_jit
def collision_sweep(points, perms, I, J, p, w, buf):
    """One sweep over all marginals; row ``i`` of I/J is marginal i's plan."""
    accepted = 0
    gain = 0.0
    for k in range(perms.shape[0]):
        pair_deltas(points, perms, k, I[k], J[k], p, w, buf)
        acc, g = apply_swaps(perms, k, I[k], J[k], buf)
        accepted += acc
        gain += g
    return accepted, gain


@_jit
def isa_marginal(points, perms, k, p, w):
    """All ordered pairs j < m of one marginal, applied in place as found."""
    N = perms.shape[1]
    accepted = 0
    gain = 0.0
    for j in range(N):
        for m in range(j + 1, N):
            d = swap_delta(points, perms, k, j, m, p, w)
            if d < 0.0:
                t = perms[k, j]
                perms[k, j] = perms[k, m]
                perms[k, m] = t
                accepted += 1
                gain += d
    return accepted, gain


def as_index(a):
    return np.ascontiguousarray(a, dtype=np.intp)
