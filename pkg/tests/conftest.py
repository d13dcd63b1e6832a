import numpy as np
import pytest

from emaxsum import EmspInstance, LinearConstraint, PointSet, build_edm

SQRT2 = 2.0 ** 0.5


@pytest.fixture
def unit_triangle():
    """Points (0,0), (1,0), (0,1): distances 1, 1, sqrt(2)."""
    return build_edm(PointSet.from_list([(0, 0), (1, 0), (0, 1)]))


@pytest.fixture
def cdp_toy():
    """Weights (3, 4, 5) with capacity 8 over points (0,0), (3,4), (6,0).

    Pairwise distances are 5, 6, 5; the only feasible pairs are {1,2}
    (weight 7) and {1,3} (weight 8), so the optimum is 6 at (1, 0, 1).
    """
    return EmspInstance.from_points(
        [(0, 0), (3, 4), (6, 0)],
        constraints=[LinearConstraint({"x1": 3, "x2": 4, "x3": 5}, "<=", 8)],
        name="cdp_toy")


def random_distance_matrix(rng, n, s=2, lo=0.0, hi=100.0):
    pts = PointSet(rng.uniform(lo, hi, size=(n, s)))
    return build_edm(pts), pts


def pairwise_sum(q, x):
    """Independent objective oracle: explicit loop over index pairs."""
    n = q.n
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            total += q.entries[i, j] * x[i] * x[j]
    return total
