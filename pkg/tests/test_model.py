import numpy as np
import pytest

from emaxsum import (DistanceMatrix, EmspInstance, LinearConstraint, PointSet,
                     VariableDecl, build_edm, is_feasible, max_cardinality_model,
                     solve_milp, validate)
from emaxsum.instances import GeneratorSpec, gen_cdp

from oracles import binary_milp_max


def _read_matrix_instance(entries):
    q = DistanceMatrix(entries)
    sel = tuple(VariableDecl.binary(f"x{i + 1}") for i in range(q.n))
    return EmspInstance(q=q, selection_vars=sel, q_source="read")


class TestDecls:
    def test_binary_bounds_enforced(self):
        with pytest.raises(ValueError):
            VariableDecl("x", "binary", 0.0, 2.0)

    def test_bad_kind(self):
        with pytest.raises(ValueError):
            VariableDecl("x", "semicontinuous", 0.0, 1.0)

    def test_constraint_needs_nonzero(self):
        with pytest.raises(ValueError):
            LinearConstraint({"x": 0.0}, "<=", 1.0)

    def test_model_rejects_unknown_names(self):
        with pytest.raises(ValueError):
            from emaxsum.model import MilpModel
            MilpModel((VariableDecl.binary("a"),), (LinearConstraint({"b": 1}, "<=", 1),), {})


class TestValidate:
    def test_generator_output_is_clean(self):
        inst = gen_cdp(GeneratorSpec(family="cdp", n=25, coords=2, seed=3))
        assert validate(inst) == []

    def test_asymmetric_matrix(self):
        inst = _read_matrix_instance([[0, 1], [2, 0]])
        assert "matrix not symmetric at (1,2)" in validate(inst)

    def test_infeasible_knapsack_prescan(self):
        # Capacity below the lightest weight: no nonzero selection fits.
        inst = EmspInstance.from_points(
            [(0, 0), (1, 0), (0, 1)],
            constraints=[LinearConstraint({"x1": 3, "x2": 4, "x3": 5}, "<=", 2)])
        assert "no nonzero selection is feasible" in validate(inst)

    def test_aux_infinite_bound_warns(self):
        inst = EmspInstance.from_points(
            [(0, 0), (1, 0)],
            aux_vars=[VariableDecl.continuous("t1", 0.0, float("inf"))])
        assert any("infinite bound" in msg for msg in validate(inst))

    def test_reserved_theta_name(self):
        inst = EmspInstance.from_points(
            [(0, 0), (1, 0)],
            aux_vars=[VariableDecl.continuous("theta", 0.0, 1.0)])
        assert any("reserved" in msg for msg in validate(inst))


class TestIsFeasible:
    def test_cdp_cases(self, cdp_toy):
        assert is_feasible(cdp_toy, {"x1": 1, "x2": 1, "x3": 0})
        assert not is_feasible(cdp_toy, {"x1": 1, "x2": 1, "x3": 1})
        assert not is_feasible(cdp_toy, {"x1": 0, "x2": 0, "x3": 0})

    def test_missing_variable(self, cdp_toy):
        with pytest.raises(KeyError):
            is_feasible(cdp_toy, {"x1": 1, "x2": 0})

    def test_integrality_checked(self, cdp_toy):
        assert not is_feasible(cdp_toy, {"x1": 0.5, "x2": 0, "x3": 1})

    def test_matches_direct_evaluation(self):
        rng = np.random.default_rng(13)
        n = 10
        pts = PointSet(rng.uniform(0, 100, size=(n, 2)))
        weights = rng.integers(1, 50, size=n).astype(float)
        rhs = 0.4 * weights.sum()
        inst = EmspInstance.from_points(
            pts, constraints=[LinearConstraint(
                {f"x{i + 1}": weights[i] for i in range(n)}, "<=", rhs)])
        for mask in range(2 ** n):
            x = [(mask >> j) & 1 for j in range(n)]
            expected = (float(np.dot(weights, x)) <= rhs + 1e-6) and sum(x) >= 1
            got = is_feasible(inst, {f"x{i + 1}": x[i] for i in range(n)})
            assert got == expected


class TestMaxCardinality:
    def test_cdp_toy(self, cdp_toy):
        m = max_cardinality_model(cdp_toy)
        assert solve_milp(m).objective_value == pytest.approx(2.0)
        status, best, _ = binary_milp_max(m)
        assert status == "optimal" and best == 2

    def test_pinned_cardinality(self):
        inst = EmspInstance.from_points(
            [(0, 0), (1, 0), (0, 1), (2, 2)],
            constraints=[LinearConstraint({f"x{i}": 1.0 for i in range(1, 5)}, "=", 2)])
        assert solve_milp(max_cardinality_model(inst)).objective_value == pytest.approx(2.0)

    def test_unconstrained(self):
        inst = EmspInstance.from_points([(0, 0), (1, 0), (0, 1)])
        assert solve_milp(max_cardinality_model(inst)).objective_value == pytest.approx(3.0)
