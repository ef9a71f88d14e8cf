"""Swap-based solvers: randomized collisions and the full pairwise sweep.

Both solvers share one move: exchange two entries of a single marginal's
permutation when, and only when, the total cost strictly decreases.

The collision solver draws a fresh random pairing of positions per marginal
and tests ``floor(N_p/2)`` disjoint pairs, so one sweep is linear in N_p.
Because the pairs are disjoint their deltas are independent; they are
evaluated against the pre-sweep pairing (optionally on worker threads) and
applied in plan order, which reproduces the serial result exactly.

The iterated swapping algorithm (ISA) tests every pair ``j < k`` of every
marginal in nested-loop order, mutating the pairing as swaps are accepted.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import median
from typing import Callable, NamedTuple

import numpy as np

from collot import _kernels
from collot.core import CouplingState, Problem, SolverConfig, init_coupling
from collot.cost import PairwiseLp, _generic_delta, total_cost
from collot.errors import CollotError, TooFewPoints

log = logging.getLogger(__name__)

RECOMPUTE_RTOL = 1e-8


class CostDriftError(CollotError, AssertionError):
    """The running cost drifted from a full recompute beyond tolerance."""


class PairingPlan(NamedTuple):
    I: np.ndarray
    J: np.ndarray


@dataclass
class SweepStats:
    proposed: int
    accepted: int
    cost_after: float
    wall_ms: float


class TraceRow(NamedTuple):
    sweep: int
    mean_cost: float
    accepted: int
    cumulative_candidates: int
    wall_ms: float


@dataclass
class RunReport:
    method: str
    final_mean_cost: float
    sweeps_run: int
    trace: list[TraceRow]
    converged: bool
    wall_ms: float
    seed: int
    accepted_total: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def initial_mean_cost(self) -> float:
        return self.trace[0].mean_cost

    @property
    def costs(self) -> list[float]:
        """Mean cost per sweep; entry 0 is the initial pairing."""
        return [row.mean_cost for row in self.trace]

    @property
    def ms_per_sweep(self) -> float:
        times = [row.wall_ms for row in self.trace[1:]]
        return median(times) if times else 0.0


def make_pairing(num_points: int, rng: np.random.Generator, out: np.ndarray | None = None) -> PairingPlan:
    """Split a uniform random permutation into halves ``I`` and ``J``.

    With odd ``num_points`` the last shuffled index is left out. ``out``, if
    given, is a length-``num_points`` index buffer filled in place.
    """
    if num_points < 2:
        raise TooFewPoints(f"need at least 2 points to pair, got {num_points}")
    if out is None:
        out = np.empty(num_points, dtype=np.intp)
    out[:] = np.arange(num_points)
    rng.shuffle(out)
    h = num_points // 2
    return PairingPlan(out[:h], out[h:2 * h])


def collision_sweep(problem: Problem, state: CouplingState, rng: np.random.Generator | None = None,
                    executor: ThreadPoolExecutor | None = None, workers: int = 1) -> SweepStats:
    rng = state.rng if rng is None else rng
    t0 = time.perf_counter()
    K, N = problem.K, problem.num_points
    h = N // 2
    if h == 0:
        return SweepStats(0, 0, state.mean(), 0.0)

    # Pairings never depend on the state, so all K can be drawn up front.
    order = np.empty((K, N), dtype=np.intp)
    plans = [make_pairing(N, rng, out=order[i]) for i in range(K)]
    cost = problem.cost
    if isinstance(cost, PairwiseLp) and executor is None:
        accepted, gain = _kernels.collision_sweep(problem.points, state.perms, order[:, :h], order[:, h:2 * h],
                                                  float(cost.p), float(cost.weight), np.empty(h))
    else:
        accepted, gain = 0, 0.0
        buf = np.empty(h)
        for k, plan in enumerate(plans):
            if isinstance(cost, PairwiseLp):
                _threaded_deltas(problem, state.perms, k, plan, buf, executor, workers)
            else:
                for m in range(h):
                    buf[m] = _generic_delta(problem, state.perms, k, plan.I[m], plan.J[m])
            acc, g = _kernels.apply_swaps(state.perms, k, plan.I, plan.J, buf)
            accepted += acc
            gain += g
    state.total_cost += gain
    state.sweep_count += 1
    state.candidates += K * h
    return SweepStats(K * h, int(accepted), state.mean(), (time.perf_counter() - t0) * 1e3)


def _threaded_deltas(problem, perms, k, plan, buf, executor, workers):
    p, w = float(problem.cost.p), float(problem.cost.weight)
    bounds = np.linspace(0, len(plan.I), workers + 1).astype(int)
    jobs = [executor.submit(_kernels.pair_deltas, problem.points, perms, k, plan.I[lo:hi], plan.J[lo:hi], p, w,
                            buf[lo:hi])
            for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    for job in jobs:
        job.result()


def isa_sweep(problem: Problem, state: CouplingState) -> SweepStats:
    t0 = time.perf_counter()
    K, N = problem.K, problem.num_points
    cost = problem.cost
    accepted, gain = 0, 0.0
    for k in range(K):
        if isinstance(cost, PairwiseLp):
            acc, g = _kernels.isa_marginal(problem.points, state.perms, k, float(cost.p), float(cost.weight))
        else:
            acc, g = _isa_marginal_generic(problem, state.perms, k)
        accepted += acc
        gain += g
    proposed = K * N * (N - 1) // 2
    state.total_cost += gain
    state.sweep_count += 1
    state.candidates += proposed
    return SweepStats(proposed, int(accepted), state.mean(), (time.perf_counter() - t0) * 1e3)


def _isa_marginal_generic(problem, perms, k):
    N = perms.shape[1]
    accepted, gain = 0, 0.0
    for j in range(N):
        for m in range(j + 1, N):
            d = _generic_delta(problem, perms, k, j, m)
            if d < 0.0:
                perms[k, j], perms[k, m] = perms[k, m], perms[k, j]
                accepted += 1
                gain += d
    return accepted, gain


def _relative_drop(old: float, new: float) -> float:
    return (old - new) / max(abs(old), 1e-300)


def _solve(problem: Problem, config: SolverConfig, method: str,
           step: Callable[[Problem, CouplingState], SweepStats], stop_on_fixed_point: bool):
    t_start = time.perf_counter()
    state = init_coupling(problem, config)
    N = problem.num_points
    trace = [TraceRow(0, state.mean(), 0, 0, 0.0)]
    converged = N < 2
    accepted_total = 0
    sweep = 0
    while not converged and sweep < config.max_sweeps:
        stats = step(problem, state)
        sweep += 1
        accepted_total += stats.accepted
        if sweep % config.recompute_interval == 0:
            _refresh_cost(problem, state)
        trace.append(TraceRow(sweep, state.mean(), stats.accepted, state.candidates, stats.wall_ms))
        if stop_on_fixed_point and stats.accepted == 0:
            converged = True
        elif sweep >= config.window:
            converged = _relative_drop(trace[sweep - config.window].mean_cost, trace[-1].mean_cost) <= config.tolerance
    _refresh_cost(problem, state)
    log.debug("%s: %d sweeps, converged=%s, mean cost %.6g", method, sweep, converged, state.mean())
    report = RunReport(method=method, final_mean_cost=state.mean(), sweeps_run=sweep, trace=trace,
                       converged=converged, wall_ms=(time.perf_counter() - t_start) * 1e3, seed=config.seed,
                       accepted_total=accepted_total)
    return state, report


def _refresh_cost(problem: Problem, state: CouplingState):
    fresh = total_cost(problem, state.perms)
    err = abs(fresh - state.total_cost)
    if err > RECOMPUTE_RTOL * max(abs(fresh), abs(state.checkpoint_cost)):
        raise CostDriftError(f"running cost {state.total_cost!r} vs recomputed {fresh!r} after "
                             f"{state.sweep_count} sweeps")
    state.total_cost = fresh
    state.checkpoint_cost = fresh


def collision_solve(problem: Problem, config: SolverConfig) -> tuple[CouplingState, RunReport]:
    """Repeat collision sweeps until the windowed relative decrease is within tolerance."""
    if config.workers > 1 and isinstance(problem.cost, PairwiseLp):
        with ThreadPoolExecutor(config.workers) as pool:
            def step(pr, st):
                return collision_sweep(pr, st, executor=pool, workers=config.workers)
            return _solve(problem, config, "collision", step, stop_on_fixed_point=False)
    return _solve(problem, config, "collision", collision_sweep, stop_on_fixed_point=False)


def isa_solve(problem: Problem, config: SolverConfig) -> tuple[CouplingState, RunReport]:
    """Repeat full ISA sweeps; a sweep with no accepted swap is a fixed point and stops the run."""
    return _solve(problem, config, "isa", isa_sweep, stop_on_fixed_point=True)
