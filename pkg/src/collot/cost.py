"""Tuple costs, coupling cost and the constant-time swap delta.

Two cost models are supported. :class:`PairwiseLp` is the sum over marginal
pairs of ``w * ||x_i - x_j||_p^p``; with ``w = 1/2, p = 2`` it is the
Gangbo-Swiech cost and with ``w = 1`` it is the pairwise distance estimator.
Its swap delta touches only the two affected tuples, O(nK) work. A
:class:`GenericTuple` wraps any callable on a K-tuple of points and falls
back to four tuple evaluations per delta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from collot import _kernels
from collot.errors import DimensionMismatch, IndexOutOfRange, SamePosition, ValidationError

if TYPE_CHECKING:
    from collot.core import CouplingState, Problem


@dataclass(frozen=True)
class PairwiseLp:
    p: float = 2.0
    weight: float = 1.0

    def __post_init__(self):
        if not self.p >= 1:
            raise ValidationError(f"p must be >= 1, got {self.p}")
        if not self.weight > 0:
            raise ValidationError(f"pair weight must be > 0, got {self.weight}")


@dataclass(frozen=True)
class GenericTuple:
    eval: Callable[[Sequence[np.ndarray]], float]


CostModel = PairwiseLp | GenericTuple


def gangbo_swiech() -> PairwiseLp:
    """Half squared Euclidean distance summed over marginal pairs."""
    return PairwiseLp(p=2.0, weight=0.5)


def _pow_dist(x: np.ndarray, y: np.ndarray, p: float) -> float:
    diff = np.abs(x - y)
    if p == 2.0:
        return float(np.dot(diff, diff))
    if p == 1.0:
        return float(diff.sum())
    return float(np.sum(diff ** p))


def tuple_cost(cost: CostModel, points: Sequence) -> float:
    if isinstance(cost, GenericTuple):
        return float(cost.eval(points))
    pts = [np.atleast_1d(np.asarray(x, dtype=np.float64)) for x in points]
    if len({x.shape for x in pts}) > 1:
        raise DimensionMismatch(f"tuple points have shapes {[x.shape for x in pts]}")
    s = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            s += _pow_dist(pts[i], pts[j], cost.p)
    return cost.weight * s


def total_cost(problem: Problem, perms: np.ndarray) -> float:
    """Unnormalized sum of tuple costs over all N_p tuples."""
    cost = problem.cost
    if isinstance(cost, PairwiseLp):
        return _kernels.total_cost(problem.points, perms, float(cost.p), float(cost.weight))
    s = 0.0
    for r in range(perms.shape[1]):
        s += tuple_cost(cost, [m.data[perms[i, r]] for i, m in enumerate(problem.marginals)])
    return s


def mean_cost(problem: Problem, state: CouplingState) -> float:
    """Mean tuple cost recomputed from scratch, ignoring the running sum."""
    return total_cost(problem, state.perms) / problem.num_points


def swap_delta(problem: Problem, state: CouplingState, k: int, a: int, b: int) -> float:
    """Change in the total cost if entries ``a`` and ``b`` of marginal ``k`` were exchanged."""
    N, K = problem.num_points, problem.K
    if not (0 <= k < K and 0 <= a < N and 0 <= b < N):
        raise IndexOutOfRange(f"(k={k}, a={a}, b={b}) outside K={K}, N_p={N}")
    if a == b:
        raise SamePosition(f"swap positions coincide: {a}")
    cost = problem.cost
    if isinstance(cost, PairwiseLp):
        return _kernels.swap_delta(problem.points, state.perms, k, a, b, float(cost.p), float(cost.weight))
    return _generic_delta(problem, state.perms, k, a, b)


def _generic_delta(problem: Problem, perms: np.ndarray, k: int, a: int, b: int) -> float:
    ev = problem.cost.eval
    ta = [m.data[perms[i, a]] for i, m in enumerate(problem.marginals)]
    tb = [m.data[perms[i, b]] for i, m in enumerate(problem.marginals)]
    before = ev(ta) + ev(tb)
    ta[k], tb[k] = tb[k], ta[k]
    return float(ev(ta) + ev(tb) - before)


def wasserstein_estimate(problem: Problem, state: CouplingState, p: float = 2.0) -> float:
    """Pairwise-sum L^p distance of the current pairing, divided by N_p."""
    if problem.points is None:
        raise DimensionMismatch("marginals do not share a dimension")
    return _kernels.total_cost(problem.points, state.perms, float(p), 1.0) / problem.num_points


def pair_estimate(problem: Problem, state: CouplingState, j: int, k: int, p: float = 2.0) -> float:
    """Distance term between marginals ``j`` and ``k`` read off the joint pairing."""
    xj = problem.marginals[j].data[state.perms[j]]
    xk = problem.marginals[k].data[state.perms[k]]
    if xj.shape != xk.shape:
        raise DimensionMismatch(f"marginals {j} and {k} differ in dimension")
    diff = np.abs(xj - xk)
    return float(np.sum(diff * diff if p == 2.0 else diff ** p)) / problem.num_points
