"""Exact and baseline solvers used to check the stochastic ones."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.spatial.distance import cdist

from collot.core import MarginalSamples, Problem
from collot.cost import CostModel, GenericTuple, PairwiseLp, total_cost, tuple_cost
from collot.errors import DimensionMismatch, NumericalUnderflow, TooLarge

ASSIGNMENT_MAX_N = 4096
SINKHORN_MAX_N = 16384
BRUTE_FORCE_MAX = 10**7


@dataclass
class AssignmentResult:
    perm: np.ndarray
    mean_cost: float


@dataclass
class SinkhornResult:
    coupling: np.ndarray
    reg_cost: float
    iterations: int
    converged: bool

    def marginal_violation(self) -> float:
        n = self.coupling.shape[0]
        return max(np.abs(self.coupling.sum(1) - 1 / n).max(), np.abs(self.coupling.sum(0) - 1 / n).max())


def _as_points(x) -> np.ndarray:
    if isinstance(x, MarginalSamples):
        return x.data
    arr = np.asarray(x, dtype=np.float64)
    return arr.reshape(-1, 1) if arr.ndim == 1 else arr


def pair_cost_matrix(X1, X2, cost: CostModel = PairwiseLp()) -> np.ndarray:
    """Dense N1 x N2 matrix of two-point tuple costs."""
    x, y = _as_points(X1), _as_points(X2)
    if isinstance(cost, GenericTuple):
        return np.array([[tuple_cost(cost, [a, b]) for b in y] for a in x])
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatch(f"dimensions {x.shape[1]} and {y.shape[1]} differ")
    if cost.p == 2.0:
        C = cdist(x, y, "sqeuclidean")
    elif cost.p == 1.0:
        C = cdist(x, y, "cityblock")
    else:
        C = cdist(x, y, "minkowski", p=cost.p) ** cost.p
    return cost.weight * C


@numba.njit(cache=True)
def _augment(C, u, v, path, row4col, dist, i, SR, SC, remaining):
    n = C.shape[0]
    for it in range(n):
        remaining[it] = n - 1 - it
    n_left = n
    SR[:] = False
    SC[:] = False
    dist[:] = np.inf
    min_val = 0.0
    sink = -1
    while sink == -1:
        index = -1
        lowest = np.inf
        SR[i] = True
        for it in range(n_left):
            j = remaining[it]
            r = min_val + C[i, j] - u[i] - v[j]
            if r < dist[j]:
                path[j] = i
                dist[j] = r
            if dist[j] < lowest or (dist[j] == lowest and row4col[j] == -1):
                lowest = dist[j]
                index = it
        min_val = lowest
        j = remaining[index]
        if row4col[j] == -1:
            sink = j
        else:
            i = row4col[j]
        SC[j] = True
        n_left -= 1
        remaining[index] = remaining[n_left]
    return sink, min_val


@numba.njit(cache=True)
def _hungarian(C):
    # Shortest augmenting paths with deferred dual updates, square finite C.
    n = C.shape[0]
    u = np.zeros(n)
    v = np.zeros(n)
    dist = np.empty(n)
    path = np.full(n, -1, dtype=np.int64)
    col4row = np.full(n, -1, dtype=np.int64)
    row4col = np.full(n, -1, dtype=np.int64)
    SR = np.empty(n, dtype=np.bool_)
    SC = np.empty(n, dtype=np.bool_)
    remaining = np.empty(n, dtype=np.int64)
    for cur in range(n):
        sink, min_val = _augment(C, u, v, path, row4col, dist, cur, SR, SC, remaining)
        u[cur] += min_val
        for i in range(n):
            if SR[i] and i != cur:
                u[i] += min_val - dist[col4row[i]]
        for j in range(n):
            if SC[j]:
                v[j] -= min_val - dist[j]
        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            nxt = col4row[i]
            col4row[i] = j
            j = nxt
            if i == cur:
                break
    return col4row


def hungarian(C: np.ndarray) -> np.ndarray:
    """Minimum-cost perfect matching of a square cost matrix; ``perm[row] = column``."""
    C = np.ascontiguousarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {C.shape}")
    return _hungarian(C).astype(np.intp)


def exact_assignment_2m(X1, X2, cost: CostModel = PairwiseLp()) -> AssignmentResult:
    n1, n2 = len(_as_points(X1)), len(_as_points(X2))
    if n1 != n2:
        raise ValueError(f"sample counts differ: {n1} vs {n2}")
    if n1 > ASSIGNMENT_MAX_N:
        raise TooLarge(f"N_p={n1} exceeds the assignment guard {ASSIGNMENT_MAX_N}")
    C = pair_cost_matrix(X1, X2, cost)
    perm = hungarian(C)
    return AssignmentResult(perm, float(C[np.arange(n1), perm].sum() / n1))


def brute_force_mmot(problem: Problem) -> tuple[np.ndarray, float]:
    """Global optimum over all permutations of marginals 2..K (marginal 1 fixed).

    Permutations are visited in lexicographic order and the first minimum wins.
    """
    N, K = problem.num_points, problem.K
    if math.factorial(N) ** (K - 1) > BRUTE_FORCE_MAX:
        raise TooLarge(f"({N}!)^{K - 1} candidate pairings exceed {BRUTE_FORCE_MAX}")
    P = np.array(list(itertools.permutations(range(N))), dtype=np.intp)
    ident = np.arange(N)

    if isinstance(problem.cost, GenericTuple):
        best, best_perms = np.inf, None
        for combo in itertools.product(range(len(P)), repeat=K - 1):
            perms = np.vstack([ident] + [P[c] for c in combo])
            c = total_cost(problem, perms)
            if c < best:
                best, best_perms = c, perms
        return best_perms, total_cost(problem, best_perms) / N

    data = [m.data for m in problem.marginals]
    C = {(i, j): pair_cost_matrix(data[i], data[j], problem.cost) for i in range(K) for j in range(i + 1, K)}
    last = K - 1
    best, best_perms = np.inf, None
    for combo in itertools.product(range(len(P)), repeat=K - 2):
        prefix = [ident] + [P[c] for c in combo]
        base = sum(C[i, j][prefix[i], prefix[j]].sum() for i in range(last) for j in range(i + 1, last))
        vec = base + sum(C[i, last][prefix[i][None, :], P].sum(axis=1) for i in range(last))
        idx = int(np.argmin(vec))
        if vec[idx] < best:
            best, best_perms = vec[idx], np.vstack(prefix + [P[idx]])
    return best_perms, total_cost(problem, best_perms) / N


def sorted_1d_oracle(x1, x2, p: float = 2.0, weight: float = 1.0) -> float:
    """Mean cost of the monotone pairing of two 1-D sample sets."""
    a = np.sort(np.asarray(x1, dtype=np.float64).ravel())
    b = np.sort(np.asarray(x2, dtype=np.float64).ravel())
    if a.shape != b.shape:
        raise ValueError("sample counts differ")
    return float(weight * np.mean(np.abs(a - b) ** p))


def sinkhorn_2m(X1, X2, lam: float, max_iter: int = 100_000, threshold: float = 1e-9,
                cost: CostModel = PairwiseLp()) -> SinkhornResult:
    """Entropic OT between uniform empirical measures with Gibbs kernel ``exp(-C/lam)``.

    Iterates the standard scaling updates, switching to log-domain potentials
    when ``lam`` is small relative to the median cost. Stops once the largest
    row-sum deviation from ``1/N`` is at most ``threshold``.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    n, n2 = len(_as_points(X1)), len(_as_points(X2))
    if n != n2:
        raise ValueError(f"sample counts differ: {n} vs {n2}")
    if n > SINKHORN_MAX_N:
        raise TooLarge(f"N_p={n} exceeds the dense Sinkhorn guard {SINKHORN_MAX_N}")
    C = pair_cost_matrix(X1, X2, cost)
    if lam < 0.05 * np.median(C):
        P, it, ok = _sinkhorn_log(C, lam, max_iter, threshold)
    else:
        P, it, ok = _sinkhorn_plain(C, lam, max_iter, threshold)
    return SinkhornResult(P, float(np.sum(P * C)), it, ok)


def _sinkhorn_plain(C, lam, max_iter, threshold):
    n = C.shape[0]
    a = np.full(n, 1.0 / n)
    Kmat = np.exp(-C / lam)
    if not (Kmat.sum(1).all() and Kmat.sum(0).all()):
        raise NumericalUnderflow(f"Gibbs kernel vanished for lam={lam}; rescale the cost or raise lam")
    v = np.ones(n)
    it, ok = 0, False
    with np.errstate(divide="raise", over="raise", invalid="raise"):
        try:
            while it < max_iter:
                it += 1
                u = a / (Kmat @ v)
                v = a / (Kmat.T @ u)
                if np.abs(u * (Kmat @ v) - a).max() <= threshold:
                    ok = True
                    break
        except FloatingPointError as exc:
            raise NumericalUnderflow(f"scaling vectors overflowed for lam={lam}") from exc
    return u[:, None] * Kmat * v[None, :], it, ok


@numba.njit(cache=True)
def _row_lse(S, g, out):
    # out[i] = log sum_j exp(S[i, j] + g[j])
    n, m = S.shape
    for i in range(n):
        hi = -np.inf
        for j in range(m):
            hi = max(hi, S[i, j] + g[j])
        acc = 0.0
        for j in range(m):
            acc += np.exp(S[i, j] + g[j] - hi)
        out[i] = hi + np.log(acc)


@numba.njit(cache=True)
def _absorb(S, ST, f, g, u, v, Kt, lse, log_a):
    # fold the scalings into the potentials, take one exact log-domain step, rebuild the kernel
    n = f.shape[0]
    fold = True
    for i in range(n):
        if not (np.isfinite(u[i]) and np.isfinite(v[i]) and u[i] > 0.0 and v[i] > 0.0):
            fold = False
    if fold:
        for i in range(n):
            f[i] += np.log(u[i])
            g[i] += np.log(v[i])
    _row_lse(S, g, lse)
    for i in range(n):
        f[i] = log_a - lse[i]
    _row_lse(ST, f, lse)
    for j in range(n):
        g[j] = log_a - lse[j]
    for i in range(n):
        for j in range(n):
            Kt[i, j] = np.exp(S[i, j] + f[i] + g[j])
    u[:] = 1.0
    v[:] = 1.0


@numba.njit(cache=True, error_model="numpy")
def _sinkhorn_log_loop(S, ST, max_iter, threshold):
    # Potentials f, g (in units of lam) carry the scale; the rescaled kernel
    # Kt = exp(S + f + g) stays O(1) near the plan's support, so the inner
    # scaling steps cannot underflow before the next absorption.
    n = S.shape[0]
    log_a = -np.log(n)
    a = 1.0 / n
    f = np.zeros(n)
    g = np.zeros(n)
    u = np.ones(n)
    v = np.ones(n)
    lse = np.empty(n)
    Kv = np.empty(n)
    Kt = np.empty((n, n))
    _absorb(S, ST, f, g, u, v, Kt, lse, log_a)
    it, ok = 0, False
    while it < max_iter:
        it += 1
        for j in range(n):
            acc = 0.0
            for i in range(n):
                acc += Kt[i, j] * u[i]
            v[j] = a / acc
        worst = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += Kt[i, j] * v[j]
            Kv[i] = acc
            worst = max(worst, abs(u[i] * acc - a))
        if worst <= threshold:
            ok = True
            break
        big = False
        for i in range(n):
            u[i] = a / Kv[i]
            if not (1e-50 < u[i] < 1e50 and 1e-50 < v[i] < 1e50):
                big = True
        if big:
            _absorb(S, ST, f, g, u, v, Kt, lse, log_a)
    for i in range(n):
        f[i] += np.log(u[i])
        g[i] += np.log(v[i])
    return f, g, it, ok


def _sinkhorn_log(C, lam, max_iter, threshold):
    S = -C / lam
    f, g, it, ok = _sinkhorn_log_loop(S, np.ascontiguousarray(S.T), max_iter, threshold)
    return np.exp(S + f[:, None] + g[None, :]), it, ok
