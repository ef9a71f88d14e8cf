import itertools

import numpy as np
import pytest

from collot import PairwiseLp, new_problem


def brute_total(problem, perms):
    """Reference total cost: explicit loop over tuples and marginal pairs."""
    cost = problem.cost
    total = 0.0
    for r in range(problem.num_points):
        pts = [m.data[perms[i][r]] for i, m in enumerate(problem.marginals)]
        if isinstance(cost, PairwiseLp):
            for i, j in itertools.combinations(range(len(pts)), 2):
                total += cost.weight * float(np.sum(np.abs(pts[i] - pts[j]) ** cost.p))
        else:
            total += cost.eval(pts)
    return total


def gaussian_problem(K, N, n, p=2.0, weight=1.0, seed=0):
    rng = np.random.default_rng(seed)
    return new_problem([rng.standard_normal((N, n)) for _ in range(K)], PairwiseLp(p, weight))


@pytest.fixture
def two_point_problem():
    # X1 = [0, 1], X2 = [1, 0], squared distance, weight 1
    return new_problem([[0.0, 1.0], [1.0, 0.0]], PairwiseLp(2.0, 1.0))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(verdicts, key=lambda k: int(k.split()[0][1:])):
        terminalreporter.write_line(verdicts[key])
