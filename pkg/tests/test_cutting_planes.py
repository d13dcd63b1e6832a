import math

import numpy as np
import pytest

from emaxsum import (EmspInstance, InfeasibleInstanceError, LinearConstraint,
                     PointSet, SolverConfig, brute_force, build_master,
                     initial_cut, lp_tangent_loop, objective, solve,
                     solve_forced_cardinality, solve_milp, solve_repeated_ilp,
                     tangent_value)
from emaxsum.cuts import (ALGO_FORCED, ALGO_REPEATED, CutPool, LP_ALL, LP_NONE,
                          LP_ROOT, ORIGIN_INTEGER, ORIGIN_LP, tangent_cut_at)
from emaxsum.instances import GeneratorSpec, gen_blmsdp, generate

from conftest import SQRT2

C = LinearConstraint


def _random_instance(rng, n):
    pts = PointSet(rng.uniform(0, 100, size=(n, 2)))
    weights = rng.integers(1, 50, size=n).astype(float)
    rhs = float(0.45 * weights.sum())
    row = C({f"x{i + 1}": weights[i] for i in range(n)}, "<=", rhs)
    return EmspInstance.from_points(pts, constraints=[row])


class TestCutPool:
    def test_deduplicates_base_points(self, unit_triangle):
        inst = EmspInstance.from_points([(0, 0), (1, 0), (0, 1)])
        pool = CutPool()
        assert pool.add(tangent_cut_at(inst, [1, 1, 1], ORIGIN_INTEGER, 1))
        assert not pool.add(tangent_cut_at(inst, [1, 1, 1], ORIGIN_INTEGER, 2))
        assert pool.add(tangent_cut_at(inst, [1, 1, 0], ORIGIN_INTEGER, 2))
        assert len(pool) == 2

    def test_cut_row_consistency(self):
        inst = EmspInstance.from_points([(0, 0), (3, 4), (6, 0)])
        rng = np.random.default_rng(40)
        for _ in range(50):
            y = rng.uniform(0, 1, size=3)
            cut = tangent_cut_at(inst, y, ORIGIN_LP, 0)
            x = rng.uniform(0, 1, size=3)
            via_row = float(cut.gradient @ x) + cut.offset
            assert abs(via_row - tangent_value(inst.q, y, x)) <= 1e-12 * (1 + abs(cut.offset))


class TestBuildMaster:
    def test_unit_triangle_master_value(self):
        inst = EmspInstance.from_points([(0, 0), (1, 0), (0, 1)])
        pool = CutPool()
        pool.add(tangent_cut_at(inst, [1.0, 1, 1], "initial", 0))
        sol = solve_milp(build_master(inst, pool))
        assert sol.objective_value == pytest.approx(2 + SQRT2, abs=1e-9)

    def test_duplicate_cut_adds_single_row(self):
        inst = EmspInstance.from_points([(0, 0), (1, 0), (0, 1)])
        pool = CutPool()
        pool.add(tangent_cut_at(inst, [1.0, 1, 1], "initial", 0))
        pool.add(tangent_cut_at(inst, [1.0, 1, 1], "integer", 1))
        master = build_master(inst, pool)
        # instance rows (none) + selection sum + one tangent row
        assert len(master.constraints) == 2

    def test_empty_pool_rejected(self):
        inst = EmspInstance.from_points([(0, 0), (1, 0)])
        with pytest.raises(ValueError):
            build_master(inst, CutPool())

    def test_upper_approximation_property(self):
        rng = np.random.default_rng(41)
        for _ in range(10):
            inst = _random_instance(rng, 9)
            best = brute_force(inst).best_value
            pool = CutPool()
            x0, seed = initial_cut(inst)
            pool.add(seed)
            sol = solve_milp(build_master(inst, pool))
            assert sol.objective_value >= best - 1e-9

    def test_master_equals_minimax_over_feasible_points(self):
        # The master optimum is max over feasible selections of the
        # pointwise minimum of the pooled tangents; enumerate all 2^10
        # selections as the oracle.
        rng = np.random.default_rng(51)
        inst = _random_instance(rng, 10)
        pool = CutPool()
        _, seed = initial_cut(inst)
        pool.add(seed)
        for k in range(3):
            y = rng.integers(0, 2, size=10).astype(float)
            if y.any():
                pool.add(tangent_cut_at(inst, y, ORIGIN_INTEGER, k))
        from emaxsum import is_feasible
        best = -math.inf
        for mask in range(1, 2 ** 10):
            x = np.array([(mask >> j) & 1 for j in range(10)], dtype=float)
            assignment = {f"x{j + 1}": x[j] for j in range(10)}
            if not is_feasible(inst, assignment):
                continue
            best = max(best, min(tangent_value(inst.q, cut.base_point, x)
                                 for cut in pool))
        sol = solve_milp(build_master(inst, pool))
        assert sol.objective_value == pytest.approx(best, rel=1e-9, abs=1e-9)


class TestInitialCut:
    def test_cdp_toy(self, cdp_toy):
        x0, cut = initial_cut(cdp_toy)
        assert x0.sum() == 2
        assert cut.origin == "initial"

    def test_pinned_cardinality_instance(self):
        inst = gen_blmsdp(PointSet.from_list([(0,), (1,), (2,), (5,)]), p=2, delta=0.0)
        x0, _ = initial_cut(inst)
        assert x0.sum() == 2

    def test_infeasible_instance_raises(self):
        inst = EmspInstance.from_points(
            [(0, 0), (1, 0), (0, 1)],
            constraints=[C({"x1": 3, "x2": 4, "x3": 5}, "<=", 2)])
        with pytest.raises(InfeasibleInstanceError):
            initial_cut(inst)


class TestRepeated:
    def test_unit_triangle(self):
        inst = EmspInstance.from_points([(0, 0), (1, 0), (0, 1)])
        r = solve_repeated_ilp(inst, SolverConfig())
        assert r.status == "optimal"
        assert r.best_value == pytest.approx(2 + SQRT2, abs=1e-9)
        assert r.iterations <= 2

    def test_cdp_toy(self, cdp_toy):
        r = solve_repeated_ilp(cdp_toy, SolverConfig())
        assert r.status == "optimal"
        assert r.best_value == pytest.approx(6.0, abs=1e-9)
        assert list(r.best_solution) == [1, 0, 1]

    def test_matches_brute_force(self):
        rng = np.random.default_rng(42)
        for _ in range(15):
            inst = _random_instance(rng, int(rng.integers(6, 13)))
            expect = brute_force(inst).best_value
            r = solve_repeated_ilp(inst, SolverConfig())
            assert r.status == "optimal"
            assert r.best_value == pytest.approx(expect, rel=1e-6)


class TestForced:
    def test_cdp_toy_terminates_after_first_sweep(self, cdp_toy):
        r = solve_forced_cardinality(cdp_toy, SolverConfig(algorithm=ALGO_FORCED))
        assert r.status == "optimal"
        assert r.best_value == pytest.approx(6.0, abs=1e-9)
        # the cardinality <= 1 bound is below 6, so one outer iteration
        assert r.iterations == 1

    def test_pinned_cardinality_single_iteration(self):
        pts = PointSet(np.random.default_rng(43).uniform(0, 100, size=(10, 2)))
        inst = gen_blmsdp(pts, p=4, delta=0.0)
        r = solve_forced_cardinality(inst, SolverConfig(algorithm=ALGO_FORCED))
        assert r.status == "optimal"
        assert r.iterations == 1

    def test_agrees_with_repeated(self):
        rng = np.random.default_rng(44)
        for _ in range(10):
            inst = _random_instance(rng, int(rng.integers(6, 13)))
            a = solve_repeated_ilp(inst, SolverConfig())
            b = solve_forced_cardinality(inst, SolverConfig(algorithm=ALGO_FORCED))
            assert a.best_value == pytest.approx(b.best_value, rel=1e-6)

    def test_lazy_cuts_pinned_at_generation_cardinality(self, cdp_toy):
        r = solve_forced_cardinality(cdp_toy, SolverConfig(algorithm=ALGO_FORCED))
        for cut in r.pool:
            if cut.origin == ORIGIN_INTEGER:
                assert cut.base_point.sum() in (1.0, 2.0)


class TestLpTangentLoop:
    def test_tight_pool_stalls_immediately(self):
        inst = EmspInstance.from_points([(0, 0), (1, 0), (0, 1)])
        pool = CutPool()
        x0, seed = initial_cut(inst)
        pool.add(seed)
        added = lp_tangent_loop(inst, pool, SolverConfig())
        assert added <= 1

    def test_iteration_cap(self):
        rng = np.random.default_rng(45)
        inst = _random_instance(rng, 12)
        pool = CutPool()
        _, seed = initial_cut(inst)
        pool.add(seed)
        added = lp_tangent_loop(inst, pool, SolverConfig(lp_tangent_max_iters=5))
        assert added <= 5

    def test_fractional_cuts_stay_above_optimum(self):
        rng = np.random.default_rng(46)
        inst = _random_instance(rng, 10)
        star = max(brute_force(inst).best_solutions,
                   key=lambda s: objective(inst.q, np.array(s, dtype=float)))
        fstar = objective(inst.q, np.array(star, dtype=float))
        pool = CutPool()
        _, seed = initial_cut(inst)
        pool.add(seed)
        lp_tangent_loop(inst, pool, SolverConfig())
        for cut in pool:
            h = tangent_value(inst.q, cut.base_point, np.array(star, dtype=float))
            assert h >= fstar - 1e-9


class TestSolveDispatch:
    def test_all_modes_agree(self):
        rng = np.random.default_rng(47)
        for _ in range(6):
            inst = _random_instance(rng, 10)
            expect = brute_force(inst).best_value
            for algo in (ALGO_REPEATED, ALGO_FORCED):
                for mode in (LP_NONE, LP_ROOT, LP_ALL):
                    r = solve(inst, SolverConfig(algorithm=algo, lp_tangents=mode))
                    assert r.status == "optimal"
                    assert r.best_value == pytest.approx(expect, rel=1e-6)

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            SolverConfig(time_limit_s=0.0)
        with pytest.raises(ValueError):
            SolverConfig(algorithm="annealing")
        with pytest.raises(ValueError):
            SolverConfig(lp_tangents="sometimes")


class TestReports:
    def test_bound_trace_monotone_and_sandwiched(self):
        rng = np.random.default_rng(48)
        for _ in range(8):
            inst = _random_instance(rng, 10)
            fstar = brute_force(inst).best_value
            for algo in (ALGO_REPEATED, ALGO_FORCED):
                r = solve(inst, SolverConfig(algorithm=algo))
                lbs = [lb for _, lb, _ in r.bound_trace]
                ubs = [ub for _, _, ub in r.bound_trace]
                assert all(a <= b + 1e-9 for a, b in zip(lbs, lbs[1:]))
                assert all(a >= b - 1e-9 for a, b in zip(ubs, ubs[1:]))
                for lb, ub in zip(lbs, ubs):
                    assert lb <= fstar + 1e-9 <= ub + 2e-9

    def test_iterations_bounded_by_feasible_count(self):
        rng = np.random.default_rng(49)
        for _ in range(8):
            inst = _random_instance(rng, 9)
            size = brute_force(inst).enumerated
            r = solve_repeated_ilp(inst, SolverConfig())
            assert r.iterations <= size

    def test_run_log_format(self, cdp_toy):
        lines = []
        r = solve_repeated_ilp(cdp_toy, SolverConfig(), log=lines.append)
        assert len(lines) == r.iterations
        for line in lines:
            assert line.startswith("k=")
            assert "lb=" in line and "ub=" in line and "elapsed_s=" in line

    def test_time_limit_status(self):
        rng = np.random.default_rng(50)
        inst = gen_blmsdp(PointSet(rng.uniform(0, 100, size=(120, 2))), p=10, delta=0.0)
        r = solve(inst, SolverConfig(time_limit_s=0.001))
        assert r.status == "time_limit"
        assert r.upper_bound >= r.best_value - 1e-9

    def test_hairline_infeasible_node_lp(self):
        # Regression: branch-and-cut on this seed creates a node whose LP is
        # infeasible by ~6e-5; a loose phase-one verdict once accepted it and
        # corrupted the basis. All six configurations must agree with the
        # enumeration oracle.
        inst = generate(GeneratorSpec(family="gdp_v", n=8, coords=2,
                                      ratio=0.2, phi=0.5, seed=50074))
        expect = brute_force(inst).best_value
        for algo in (ALGO_REPEATED, ALGO_FORCED):
            for mode in (LP_NONE, LP_ROOT, LP_ALL):
                r = solve(inst, SolverConfig(algorithm=algo, lp_tangents=mode))
                assert r.status == "optimal"
                assert r.best_value == pytest.approx(expect, rel=1e-6)
