"""Tangent-plane cutting algorithms for the Euclidean max-sum problem.

Two exact outer loops sit on top of the embedded MILP engine:

* repeated master: solve the epigraph master to optimality, add the
  tangent at its argmax (always a safe cut), repeat until the bounds
  close;
* forced cardinality: pin the selection cardinality at its maximum and
  solve that restriction by branch and cut, generating a lazy tangent at
  every integer candidate (tangents at equal-cardinality points always
  overestimate), then bound all smaller cardinalities and sweep the pin
  downward until the bound drops to the incumbent.

A fractional variant generates extra tangents from the master's LP
relaxation; per configuration it runs once up front, after every outer
iteration, or not at all, giving six solver setups.

A solve owns its pool and report; concurrent solves on distinct instances
are safe. Pools are never shared across solves.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .edm import objective, tangent_coefficients
from .lp import OPTIMAL as LP_OPTIMAL
from .lp import solve_lp
from .milp import INFEASIBLE, MilpLimits, OPTIMAL, TIME_LIMIT, solve_milp
from .model import EQ, GE, LE, EmspInstance, LinearConstraint, MilpModel, THETA, VariableDecl, max_cardinality_model

ALGO_REPEATED = "repeated_ilp"
ALGO_FORCED = "forced_cardinality"
_ALGORITHMS = (ALGO_REPEATED, ALGO_FORCED)

LP_NONE = "none"
LP_ROOT = "root_only"
LP_ALL = "all_iterations"
_LP_MODES = (LP_NONE, LP_ROOT, LP_ALL)

ORIGIN_INITIAL = "initial"
ORIGIN_INTEGER = "integer"
ORIGIN_LP = "lp_relaxation"

# Base points closer than this in the max norm count as the same cut.
DEDUP_TOL = 1e-12
# A lazy cut fires when theta exceeds f by this much (relative).
CUT_TRIGGER_TOL = 1e-6

STATUS_OPTIMAL = "optimal"
STATUS_TIME_LIMIT = "time_limit"


class InfeasibleInstanceError(ValueError):
    """No nonzero selection satisfies the instance constraints."""


@dataclass(frozen=True)
class TangentCut:
    """One tangent plane theta <= <gradient, x> + offset, anchored at base_point.

    gradient = Q @ base_point and offset = -0.5 * <gradient, base_point>,
    so the plane touches f exactly at the base point. origin records how
    the cut was certified: the seeding maximum-cardinality point, an
    integer candidate, or an LP-relaxation argmax.
    """

    base_point: np.ndarray
    gradient: np.ndarray
    offset: float
    origin: str
    iteration: int

    def row(self, selection_names) -> LinearConstraint:
        coeffs = {THETA: 1.0}
        for nm, g in zip(selection_names, self.gradient):
            if g != 0.0:
                coeffs[nm] = -float(g)
        return LinearConstraint(coeffs, LE, self.offset)


def tangent_cut_at(inst: EmspInstance, y, origin: str, iteration: int) -> TangentCut:
    g, off = tangent_coefficients(inst.q, y)
    yv = np.array(y, dtype=float)
    yv.setflags(write=False)
    g.setflags(write=False)
    return TangentCut(yv, g, off, origin, iteration)


class CutPool:
    """Ordered collection of tangent cuts with base-point deduplication."""

    def __init__(self):
        self._cuts = []
        self._bases = None

    def add(self, cut: TangentCut) -> bool:
        """Store the cut unless an existing base point matches within DEDUP_TOL."""
        if self._bases is not None:
            if np.abs(self._bases - cut.base_point).max(axis=1).min() <= DEDUP_TOL:
                return False
            self._bases = np.vstack([self._bases, cut.base_point])
        else:
            self._bases = cut.base_point.reshape(1, -1).copy()
        self._cuts.append(cut)
        return True

    def count(self, origin: str) -> int:
        return sum(1 for c in self._cuts if c.origin == origin)

    @property
    def cuts(self) -> tuple:
        return tuple(self._cuts)

    def __len__(self):
        return len(self._cuts)

    def __iter__(self):
        return iter(self._cuts)


@dataclass(frozen=True)
class SolverConfig:
    """One of the six solver setups plus stopping parameters.

    tolerance closes the outer UB - LB gap relative to (1 + |LB|). The two
    lp_tangent_* fields bound the fractional tangent loop, which has no
    finite-convergence guarantee of its own: a hard iteration cap and a
    minimum relative improvement of the relaxation bound per added cut.
    """

    algorithm: str = ALGO_REPEATED
    lp_tangents: str = LP_NONE
    time_limit_s: float = 600.0
    tolerance: float = 1e-9
    lp_tangent_max_iters: int = 50
    lp_tangent_min_improvement: float = 1e-6

    def __post_init__(self):
        if self.algorithm not in _ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.lp_tangents not in _LP_MODES:
            raise ValueError(f"unknown lp_tangents mode {self.lp_tangents!r}")
        if not self.time_limit_s > 0:
            raise ValueError("time_limit_s must be positive")
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")
        if self.lp_tangent_max_iters < 0 or self.lp_tangent_min_improvement < 0:
            raise ValueError("lp tangent limits must be nonnegative")


@dataclass
class SolveReport:
    """Outcome of a cutting-plane solve.

    bound_trace holds one (iteration, lower, upper) triple per outer
    iteration; lower bounds never decrease and upper bounds never increase
    along it. With status "optimal" the final gap satisfies
    UB - LB <= tolerance * (1 + |LB|). The final cut pool is attached for
    auditing.
    """

    status: str
    best_value: float
    best_solution: np.ndarray
    upper_bound: float
    iterations: int
    integer_cuts: int
    lp_cuts: int
    wall_time_s: float
    bound_trace: list
    pool: CutPool


def _selection_sum_row(inst: EmspInstance, sense: str, rhs: float) -> LinearConstraint:
    return LinearConstraint({nm: 1.0 for nm in inst.selection_names}, sense, rhs)


def build_master(inst: EmspInstance, pool: CutPool, extra=()) -> MilpModel:
    """Epigraph master: maximise theta under one row per pooled tangent.

    Rows are the instance constraints, the nonzero-selection row
    (selection sum >= 1), the tangent rows in pool order, then any extra
    rows (used to pin or cap the cardinality). Raises on an empty pool,
    where theta would be unbounded.
    """
    if len(pool) == 0:
        raise ValueError("cut pool is empty; theta would be unbounded")
    names = inst.selection_names
    variables = tuple(inst.selection_vars) + tuple(inst.aux_vars) + (
        VariableDecl.continuous(THETA, 0.0, math.inf),)
    rows = list(inst.constraints)
    rows.append(_selection_sum_row(inst, GE, 1.0))
    rows.extend(cut.row(names) for cut in pool)
    rows.extend(extra)
    return MilpModel(variables, tuple(rows), {THETA: 1.0})


def initial_cut(inst: EmspInstance, time_limit_s: float | None = None):
    """Seed cut: the tangent at a maximum-cardinality feasible selection.

    Every feasible selection has cardinality at most this one's, which
    certifies the tangent for the entire feasible set. Raises
    InfeasibleInstanceError when no nonzero selection exists.
    """
    sol = solve_milp(max_cardinality_model(inst),
                     limits=MilpLimits(time_limit_s=time_limit_s))
    if sol.status == INFEASIBLE:
        raise InfeasibleInstanceError(f"instance {inst.name or '<unnamed>'} has no feasible selection")
    if sol.status != OPTIMAL:
        raise RuntimeError("could not certify a maximum-cardinality selection within the limits")
    x0 = np.rint(inst.selection_vector(sol.values))
    if x0.sum() < 0.5:
        raise InfeasibleInstanceError(
            f"instance {inst.name or '<unnamed>'}: only the empty selection is feasible")
    return x0, tangent_cut_at(inst, x0, ORIGIN_INITIAL, 0)


def _cardinality_pinned(inst: EmspInstance) -> bool:
    """True when an instance row forces the selection sum to a constant."""
    sel = set(inst.selection_names)
    for con in inst.constraints:
        if con.sense != EQ or set(con.coefficients) != sel:
            continue
        if all(abs(c - 1.0) <= 1e-12 for c in con.coefficients.values()):
            return True
    return False


def lp_tangent_loop(inst: EmspInstance, pool: CutPool, cfg: SolverConfig,
                    iteration: int = 0, known_lb: float = -math.inf) -> int:
    """Add tangents at successive LP-relaxation argmaxes of the master.

    A fractional argmax x is only a safe cut base when f at the true
    optimum is known to be at least f(x): unlike an integer argmax, a
    fractional point can exceed every feasible selection's value, and its
    tangent then cuts the optimum off (observed on knapsack-constrained
    instances). Each candidate is therefore certified before pooling,
    either because the instance pins the selection sum with an equality
    row (the difference to any feasible point is then zero-sum, where the
    quadratic form is nonpositive), or because f(x) <= known_lb, the value
    of an already-found feasible selection.

    Stops on the first uncertified candidate, when the fractional gap
    theta - f(x) closes, when a new cut duplicates a pooled one, when the
    relaxation bound stops improving, or at the iteration cap. Requires a
    nonempty pool. Returns the number of cuts added.
    """
    if len(pool) == 0:
        raise ValueError("the pool must already hold at least one cut")
    pinned = _cardinality_pinned(inst)
    added = 0
    last_theta = None
    while added < cfg.lp_tangent_max_iters:
        sol = solve_lp(build_master(inst, pool))
        if sol.status != LP_OPTIMAL:
            raise RuntimeError(f"master relaxation came back {sol.status}")
        xk = inst.selection_vector(sol.values)
        theta = sol.objective_value
        fx = objective(inst.q, xk)
        if theta - fx <= cfg.tolerance * (1.0 + abs(fx)):
            break
        if not pinned and fx > known_lb + 1e-9 * (1.0 + abs(known_lb)):
            break
        if last_theta is not None and \
                last_theta - theta < cfg.lp_tangent_min_improvement * (1.0 + abs(theta)):
            break
        if not pool.add(tangent_cut_at(inst, xk, ORIGIN_LP, iteration)):
            break
        added += 1
        last_theta = theta
    return added


def _report(status, lb, best, ub, k, pool, t0, trace) -> SolveReport:
    return SolveReport(
        status=status,
        best_value=lb,
        best_solution=np.rint(best).astype(int),
        upper_bound=ub,
        iterations=k,
        integer_cuts=pool.count(ORIGIN_INTEGER),
        lp_cuts=pool.count(ORIGIN_LP),
        wall_time_s=time.perf_counter() - t0,
        bound_trace=trace,
        pool=pool,
    )


def _emit(log, k, lb, ub, pool, t0):
    if log is not None:
        log(f"k={k} lb={lb:.10g} ub={ub:.10g} int_cuts={pool.count(ORIGIN_INTEGER)} "
            f"lp_cuts={pool.count(ORIGIN_LP)} elapsed_s={time.perf_counter() - t0:.3f}")


def solve_repeated_ilp(inst: EmspInstance, cfg: SolverConfig, log=None) -> SolveReport:
    """Solve by repeatedly optimising the master and cutting at its argmax.

    The master optimum always yields a safe tangent, so each iteration
    tightens the upper bound while f at the argmax pushes the lower bound;
    once a base point repeats, the bounds meet. Terminates in finitely
    many iterations.
    """
    t0 = time.perf_counter()
    pool = CutPool()
    x0, seed = initial_cut(inst, time_limit_s=cfg.time_limit_s)
    pool.add(seed)
    lb = objective(inst.q, x0)
    best = x0
    ub = math.inf
    trace = [(0, lb, ub)]
    if cfg.lp_tangents != LP_NONE:
        lp_tangent_loop(inst, pool, cfg, iteration=0, known_lb=lb)
    k = 0
    status = STATUS_TIME_LIMIT
    while True:
        remaining = cfg.time_limit_s - (time.perf_counter() - t0)
        if remaining <= 0:
            break
        k += 1
        msol = solve_milp(build_master(inst, pool),
                          limits=MilpLimits(time_limit_s=remaining))
        if msol.status == INFEASIBLE:
            raise RuntimeError("master became infeasible; this should be impossible")
        if msol.status != OPTIMAL:
            # Partial solve: its bound is still a valid upper bound and any
            # incumbent is feasible, but the argmax tangent is uncertified.
            ub = min(ub, msol.best_bound)
            if msol.values is not None:
                xk = np.rint(inst.selection_vector(msol.values))
                fk = objective(inst.q, xk)
                if fk > lb:
                    lb, best = fk, xk
            trace.append((k, lb, ub))
            _emit(log, k, lb, ub, pool, t0)
            break
        xk = np.rint(inst.selection_vector(msol.values))
        ub = min(ub, msol.objective_value)
        fk = objective(inst.q, xk)
        if fk > lb:
            lb, best = fk, xk
        pool.add(tangent_cut_at(inst, xk, ORIGIN_INTEGER, k))
        if cfg.lp_tangents == LP_ALL:
            lp_tangent_loop(inst, pool, cfg, iteration=k, known_lb=lb)
        trace.append((k, lb, ub))
        _emit(log, k, lb, ub, pool, t0)
        if ub - lb <= cfg.tolerance * (1.0 + abs(lb)):
            status = STATUS_OPTIMAL
            break
    return _report(status, lb, best, ub, k, pool, t0, trace)


def solve_forced_cardinality(inst: EmspInstance, cfg: SolverConfig, log=None) -> SolveReport:
    """Solve by sweeping a pinned cardinality downward with lazy tangents.

    At each level c the master restricted to selections of cardinality
    exactly c is solved by branch and cut; every integer candidate whose
    theta overshoots f gets a lazy tangent, all of which stay in the pool.
    A second solve capped at cardinality c - 1 bounds everything below;
    the sweep stops when that bound falls to the incumbent.
    """
    t0 = time.perf_counter()
    pool = CutPool()
    x0, seed = initial_cut(inst, time_limit_s=cfg.time_limit_s)
    pool.add(seed)
    lb = objective(inst.q, x0)
    best = x0
    ub = math.inf
    trace = [(0, lb, ub)]
    if cfg.lp_tangents != LP_NONE:
        lp_tangent_loop(inst, pool, cfg, iteration=0, known_lb=lb)
    card = int(round(float(x0.sum())))
    k = 0
    status = STATUS_TIME_LIMIT
    while True:
        if card < 1:
            ub = lb
            status = STATUS_OPTIMAL
            break
        remaining = cfg.time_limit_s - (time.perf_counter() - t0)
        if remaining <= 0:
            break
        k += 1

        inner = {"val": -math.inf, "vec": None}

        def on_candidate(assignment, _k=k, _inner=inner):
            xh = inst.selection_vector(assignment)
            fh = objective(inst.q, xh)
            if fh > _inner["val"]:
                _inner["val"], _inner["vec"] = fh, xh
            theta_hat = assignment[THETA]
            if theta_hat > fh + CUT_TRIGGER_TOL * (1.0 + abs(fh)):
                cut = tangent_cut_at(inst, xh, ORIGIN_INTEGER, _k)
                if pool.add(cut):
                    return [cut.row(inst.selection_names)]
            return None

        pinned = build_master(inst, pool, extra=(_selection_sum_row(inst, EQ, float(card)),))
        msol = solve_milp(pinned, callback=on_candidate,
                          limits=MilpLimits(time_limit_s=remaining))
        if inner["vec"] is not None and inner["val"] > lb:
            lb, best = inner["val"], inner["vec"]
        if msol.status == TIME_LIMIT:
            trace.append((k, lb, ub))
            _emit(log, k, lb, ub, pool, t0)
            break
        # An infeasible pinned level is legal (no selection of exactly this
        # cardinality); the bound step below still covers everything smaller.

        remaining = cfg.time_limit_s - (time.perf_counter() - t0)
        if remaining <= 0:
            break
        if card <= 1:
            ub_raw = -math.inf
        else:
            capped = build_master(inst, pool,
                                  extra=(_selection_sum_row(inst, LE, float(card - 1)),))
            bsol = solve_milp(capped, limits=MilpLimits(time_limit_s=remaining))
            if bsol.status == TIME_LIMIT:
                ub = min(ub, max(lb, bsol.best_bound))
                trace.append((k, lb, ub))
                _emit(log, k, lb, ub, pool, t0)
                break
            ub_raw = -math.inf if bsol.status == INFEASIBLE else bsol.objective_value

        if cfg.lp_tangents == LP_ALL:
            lp_tangent_loop(inst, pool, cfg, iteration=k, known_lb=lb)

        ub = min(ub, max(lb, ub_raw))
        trace.append((k, lb, ub))
        _emit(log, k, lb, ub, pool, t0)
        if ub_raw <= lb + cfg.tolerance * (1.0 + abs(lb)):
            status = STATUS_OPTIMAL
            break
        card -= 1
    return _report(status, lb, best, ub, k, pool, t0, trace)


def solve(inst: EmspInstance, cfg: SolverConfig, log=None) -> SolveReport:
    """Dispatch to the configured algorithm and tangent-injection mode."""
    if cfg.algorithm == ALGO_REPEATED:
        return solve_repeated_ilp(inst, cfg, log=log)
    return solve_forced_cardinality(inst, cfg, log=log)
