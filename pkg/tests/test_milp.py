import math

import numpy as np
import pytest

from emaxsum import LinearConstraint, MilpLimits, MilpModel, VariableDecl, solve_milp

from oracles import binary_milp_max

V = VariableDecl
C = LinearConstraint


def _random_binary_model(rng, nmax=10):
    n = int(rng.integers(3, nmax + 1))
    names = [f"b{j}" for j in range(n)]
    rows = []
    for _ in range(int(rng.integers(1, 4))):
        coefs = {}
        for nm in names:
            c = int(rng.integers(-5, 6))
            if c:
                coefs[nm] = float(c)
        if not coefs:
            coefs[names[0]] = 1.0
        sense = rng.choice(["<=", ">=", "="], p=[0.6, 0.3, 0.1])
        rhs = float(rng.integers(-6, 10))
        rows.append(C(coefs, str(sense), rhs))
    obj = {nm: float(rng.integers(-9, 10)) for nm in names}
    return MilpModel(tuple(V.binary(nm) for nm in names), tuple(rows), obj)


def test_knapsack():
    m = MilpModel((V.binary("a"), V.binary("b"), V.binary("c")),
                  (C({"a": 3, "b": 4, "c": 5}, "<=", 8),), {"a": 3, "b": 4, "c": 5})
    sol = solve_milp(m)
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(8.0)
    assert abs(sol.objective_value - sol.best_bound) <= 1e-9 * (1 + 8)


def test_branching_needed():
    m = MilpModel((V.integer("x", 0, 5),), (C({"x": 2}, "<=", 3),), {"x": 1})
    assert solve_milp(m).objective_value == pytest.approx(1.0)


def test_infeasible_model():
    m = MilpModel((V.binary("a"),), (C({"a": 1}, ">=", 2),), {"a": 1})
    sol = solve_milp(m)
    assert sol.status == "infeasible"
    assert sol.values is None and sol.objective_value is None
    assert sol.best_bound == -math.inf


def test_callback_neutrality():
    rng = np.random.default_rng(30)
    for _ in range(20):
        m = _random_binary_model(rng)
        plain = solve_milp(m)
        noisy = solve_milp(m, callback=lambda assignment: None)
        assert plain.status == noisy.status
        assert plain.objective_value == noisy.objective_value
        assert plain.values == noisy.values
        assert plain.node_count == noisy.node_count


def test_lazy_cut_requeues_node():
    # The hook rejects the unconstrained optimum (1, 1) with a global cut;
    # the engine must re-solve and land on the constrained optimum.
    m = MilpModel((V.binary("a"), V.binary("b")), (), {"a": 2, "b": 1})
    seen = []

    def hook(assignment):
        seen.append(dict(assignment))
        if assignment["a"] + assignment["b"] > 1.5:
            return [C({"a": 1, "b": 1}, "<=", 1)]
        return None

    sol = solve_milp(m, callback=hook)
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(2.0)
    assert sol.values == {"a": 1.0, "b": 0.0}
    assert seen[0] == {"a": 1.0, "b": 1.0}


def test_every_candidate_offered_before_acceptance():
    rng = np.random.default_rng(31)
    m = _random_binary_model(rng)
    candidates = []
    sol = solve_milp(m, callback=lambda a: candidates.append(dict(a)) or None)
    if sol.status == "optimal":
        assert any(c == sol.values for c in candidates)


def test_node_limit_status():
    rng = np.random.default_rng(32)
    m = _random_binary_model(rng, nmax=10)
    sol = solve_milp(m, limits=MilpLimits(node_limit=1))
    assert sol.status in ("node_limit", "optimal", "infeasible")
    if sol.status == "node_limit":
        assert sol.best_bound > -math.inf


def test_time_limit_status():
    m = _random_binary_model(np.random.default_rng(33), nmax=12)
    sol = solve_milp(m, limits=MilpLimits(time_limit_s=1e-9))
    assert sol.status == "time_limit"


def test_bound_sequence_monotone():
    rng = np.random.default_rng(34)
    for _ in range(10):
        m = _random_binary_model(rng, nmax=10)
        popped = []
        solve_milp(m, on_node=popped.append)
        assert all(popped[i] >= popped[i + 1] - 1e-9 for i in range(len(popped) - 1))


def test_matches_enumeration():
    rng = np.random.default_rng(35)
    for _ in range(60):
        m = _random_binary_model(rng)
        status, best, _ = binary_milp_max(m)
        sol = solve_milp(m)
        assert sol.status == status
        if status == "optimal":
            assert sol.objective_value == pytest.approx(best, abs=1e-9)
            assert all(abs(v - round(v)) <= 1e-6 for v in sol.values.values())


def test_determinism():
    rng = np.random.default_rng(36)
    m = _random_binary_model(rng, nmax=11)
    a = solve_milp(m)
    b = solve_milp(m)
    assert a.node_count == b.node_count
    assert a.values == b.values
    assert a.objective_value == b.objective_value


def test_unbounded_relaxation_rejected():
    m = MilpModel((V.binary("a"), V.continuous("z", 0.0, math.inf)),
                  (C({"a": 1}, "<=", 1),), {"z": 1})
    with pytest.raises(ValueError):
        solve_milp(m)
