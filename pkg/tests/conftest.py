import numpy as np
import pytest

from minsnap import ConstraintSet, ProblemSpec, TimeGrid


def random_problem(rng, k, s, *, widths=(0.1, 10.0), t0=None, pattern="waypoint", beta=10.0):
    """Random instance with positions fixed at every knot.

    ``pattern="waypoint"``: derivatives 1..s-1 are zero at both ends.
    ``pattern="random"``: both end knots fully fixed to random values and each
    interior derivative fixed with probability 0.3.
    """
    delta = rng.uniform(*widths, size=k)
    start = rng.uniform(-5, 5) if t0 is None else t0
    times = start + np.concatenate([[0.0], np.cumsum(2 * delta)])
    fixed = {(j, 0): rng.uniform(-beta, beta) for j in range(k + 1)}
    for r in range(1, s):
        for j in (0, k):
            fixed[(j, r)] = 0.0 if pattern == "waypoint" else rng.uniform(-beta, beta)
        if pattern == "random":
            for j in range(1, k):
                if rng.random() < 0.3:
                    fixed[(j, r)] = rng.uniform(-beta, beta)
    return ProblemSpec(TimeGrid(times), ConstraintSet(fixed), s)


def rest_to_rest(s=2, t0=0.0, t1=1.0, x1=1.0):
    fixed = {(0, 0): 0.0, (1, 0): x1}
    for r in range(1, s):
        fixed[(0, r)] = 0.0
        fixed[(1, r)] = 0.0
    return ProblemSpec(TimeGrid([t0, t1]), ConstraintSet(fixed), s)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
