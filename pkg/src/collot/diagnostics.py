"""Runtime checks on solver output and post-processing of cost traces."""

from __future__ import annotations

import time
import tracemalloc
from dataclasses import dataclass
from statistics import median
from typing import Sequence

import numpy as np

from collot.core import CouplingState, Problem, SolverConfig, init_coupling, new_problem
from collot.cost import PairwiseLp
from collot.errors import DegenerateTrace
from collot.ingest import SyntheticSpec, sample_synthetic
from collot.solvers import collision_sweep, isa_sweep


def check_marginal_preservation(problem: Problem, state: CouplingState) -> bool:
    """True iff every row of ``state.perms`` is a bijection of ``0..N_p-1``."""
    perms = np.asarray(state.perms)
    N = problem.num_points
    if perms.shape != (problem.K, N):
        return False
    ref = np.arange(N)
    return all(np.array_equal(np.sort(row), ref) for row in perms)


def verify_monotone(trace: Sequence[float]) -> bool:
    for prev, nxt in zip(trace, trace[1:]):
        if nxt > prev + 1e-12 * max(1.0, abs(prev)):
            return False
    return True


@dataclass
class DecayFit:
    alpha_hat: float
    r_squared: float
    stationary: float
    points_used: int

    def __iter__(self):
        return iter((self.alpha_hat, self.r_squared))


def fit_exponential_decay(trace: Sequence[float], stationary: float, cutoff: float = 1e-3) -> DecayFit:
    """Least-squares line through ``log(trace[t] - stationary)`` against ``t``.

    Points are used from ``t = 0`` until the excess first drops below
    ``cutoff`` times its initial value (or reaches zero). The decay rate is
    minus the slope. Unpacks as ``(alpha_hat, r_squared)``.
    """
    y = np.asarray(trace, dtype=np.float64) - stationary
    if y.size == 0 or not y[0] > 0:
        raise DegenerateTrace("initial trace value is not above the stationary value")
    below = np.flatnonzero(~(y >= cutoff * y[0]))
    end = below[0] if below.size else y.size
    if end < 3:
        raise DegenerateTrace(f"only {end} usable points, need 3")
    t = np.arange(end, dtype=np.float64)
    logy = np.log(y[:end])
    slope, intercept = np.polyfit(t, logy, 1)
    resid = logy - (slope * t + intercept)
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(alpha_hat=float(-slope), r_squared=r2, stationary=float(stationary), points_used=int(end))


def measure_sweep_scaling(template: SyntheticSpec, sizes: Sequence[int], sweeps: int = 10, method: str = "collision",
                          K: int = 2, repeats: int = 5, cost=None, seed: int = 0) -> list[tuple[int, float]]:
    """Median wall time of one sweep for each problem size.

    Marginal ``i`` is drawn from ``template`` with seed ``template.seed + i``.
    Each size is timed over ``repeats`` fresh states of ``sweeps`` sweeps.
    """
    step = collision_sweep if method == "collision" else isa_sweep
    cost = cost or PairwiseLp()
    out = []
    for N in sizes:
        marg = [sample_synthetic(SyntheticSpec(template.family, N, template.n, template.seed + i, template.params))
                for i in range(K)]
        problem = new_problem(marg, cost)
        # compile / warm caches outside the timed region
        step(problem, init_coupling(problem, SolverConfig(seed=seed, init="random-shuffle")))
        times = []
        for rep in range(repeats):
            state = init_coupling(problem, SolverConfig(seed=seed + rep, init="random-shuffle"))
            for _ in range(sweeps):
                t0 = time.perf_counter()
                step(problem, state)
                times.append((time.perf_counter() - t0) * 1e3)
        out.append((N, median(times)))
    return out


def peak_solve_allocation(problem: Problem, sweeps: int, seed: int = 0) -> int:
    """Peak Python-heap bytes allocated by state init plus ``sweeps`` collision sweeps.

    The problem's sample arrays exist before tracing starts and are not counted.
    """
    config = SolverConfig(seed=seed, init="random-shuffle")
    # run once untraced so JIT compilation does not pollute the measurement
    warm = new_problem([m.data[:4] for m in problem.marginals], problem.cost)
    collision_sweep(warm, init_coupling(warm, config))
    tracemalloc.start()
    try:
        tracemalloc.reset_peak()
        base = tracemalloc.get_traced_memory()[0]
        state = init_coupling(problem, config)
        for _ in range(sweeps):
            collision_sweep(problem, state)
        peak = tracemalloc.get_traced_memory()[1]
    finally:
        tracemalloc.stop()
    return peak - base
