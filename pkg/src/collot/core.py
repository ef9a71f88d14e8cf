"""Problem and coupling-state representations.

A coupling between K equal-size sample sets is stored as K index
permutations over read-only sample arrays: ``perms[i, r]`` names the sample
of marginal ``i`` that sits in joint tuple ``r``. Swapping two entries of one
row is the only mutation the solvers perform, so the marginals can never
drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from collot.cost import CostModel, PairwiseLp, total_cost
from collot.errors import MismatchedCounts, MismatchedDims, NonFinite, ValidationError

INIT_MODES = ("identity", "random-shuffle")


class MarginalSamples:
    """One marginal's point cloud: ``num_points`` samples in ``n`` dimensions.

    ``data`` is kept as a read-only ``(num_points, n)`` float64 array; a 1-D
    input is treated as ``n = 1``.
    """

    def __init__(self, data, id: str = ""):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"marginal {id!r}: expected a non-empty (N_p, n) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFinite(f"marginal {id!r} contains NaN or Inf")
        arr.setflags(write=False)
        self.data = arr
        self.id = id

    @property
    def num_points(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    def __repr__(self):
        return f"MarginalSamples(id={self.id!r}, num_points={self.num_points}, n={self.n})"


class Problem:
    """K >= 2 marginals with a common sample count and a cost model."""

    def __init__(self, marginals: Sequence[MarginalSamples], cost: CostModel):
        self.marginals = tuple(marginals)
        self.cost = cost
        dims = {m.n for m in self.marginals}
        # Stacked (K, N_p, n) copy for the compiled kernels; None when dims differ.
        if len(dims) == 1:
            self.points = np.ascontiguousarray(np.stack([m.data for m in self.marginals]))
            self.points.setflags(write=False)
        else:
            self.points = None

    @property
    def K(self) -> int:
        return len(self.marginals)

    @property
    def num_points(self) -> int:
        return self.marginals[0].num_points

    @property
    def n(self) -> int:
        """Common dimension; raises when the marginals differ."""
        if self.points is None:
            raise MismatchedDims("marginals do not share a dimension")
        return self.points.shape[2]

    def __repr__(self):
        dims = [m.n for m in self.marginals]
        return f"Problem(K={self.K}, num_points={self.num_points}, dims={dims}, cost={self.cost!r})"


def new_problem(marginals: Sequence[MarginalSamples], cost: CostModel) -> Problem:
    marginals = [m if isinstance(m, MarginalSamples) else MarginalSamples(m, id=str(i))
                 for i, m in enumerate(marginals)]
    if not marginals:
        raise ValidationError("at least one marginal is required")
    if len(marginals) < 2:
        raise ValidationError(f"need K >= 2 marginals, got {len(marginals)}")
    counts = [m.num_points for m in marginals]
    if len(set(counts)) != 1:
        raise MismatchedCounts(f"marginals have unequal sample counts {counts}")
    if isinstance(cost, PairwiseLp):
        dims = [m.n for m in marginals]
        if len(set(dims)) != 1:
            raise MismatchedDims(f"pairwise L^p cost needs equal dimensions, got {dims}")
    return Problem(marginals, cost)


@dataclass
class SolverConfig:
    tolerance: float = 1e-4
    window: int = 50
    max_sweeps: int = 1000
    recompute_interval: int = 100
    seed: int = 0
    init: str = "identity"
    workers: int = 1

    def __post_init__(self):
        if not self.tolerance >= 0:
            raise ValidationError("tolerance must be >= 0")
        if self.window < 1:
            raise ValidationError("window must be >= 1")
        if self.max_sweeps < 1:
            raise ValidationError("max_sweeps must be >= 1")
        if self.recompute_interval < 1:
            raise ValidationError("recompute_interval must be >= 1")
        if self.init not in INIT_MODES:
            raise ValidationError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must fit in 64 unsigned bits")


@dataclass
class CouplingState:
    perms: np.ndarray
    total_cost: float
    rng: np.random.Generator
    sweep_count: int = 0
    candidates: int = field(default=0)
    # cost at the last full recompute; sets the scale for drift checks
    checkpoint_cost: float | None = None

    def __post_init__(self):
        if self.checkpoint_cost is None:
            self.checkpoint_cost = self.total_cost

    @property
    def num_points(self) -> int:
        return self.perms.shape[1]

    def mean(self) -> float:
        return self.total_cost / self.num_points

    def tuple_points(self, problem: Problem, r: int) -> list[np.ndarray]:
        """The K points currently forming joint tuple ``r``."""
        return [m.data[self.perms[i, r]] for i, m in enumerate(problem.marginals)]

    def paired_samples(self, problem: Problem) -> np.ndarray:
        """Rows of concatenated tuple points, shape ``(N_p, sum of dims)``."""
        return np.hstack([m.data[self.perms[i]] for i, m in enumerate(problem.marginals)])


def init_coupling(problem: Problem, config: SolverConfig) -> CouplingState:
    N, K = problem.num_points, problem.K
    rng = np.random.default_rng(config.seed)
    perms = np.empty((K, N), dtype=np.intp)
    perms[:] = np.arange(N)
    if config.init == "random-shuffle":
        for i in range(1, K):
            perms[i] = rng.permutation(N)
    return CouplingState(perms=perms, total_cost=total_cost(problem, perms), rng=rng)
