"""Branch and bound for mixed-integer linear models.

Best-bound node selection with deterministic tie-breaking, most-fractional
branching (ties to the lowest index), and a lazy-cut hook invoked at every
integer-feasible candidate before it can become the incumbent. Cuts
returned by the hook are appended to the model globally, so every open
node sees them, and the candidate's node is re-queued and re-solved rather
than discarded.

A solve owns its working copies of the model data and is single-threaded;
concurrent solves on distinct models are safe.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass

import numpy as np

from . import lp
from .model import CONTINUOUS, MilpModel

INT_TOL = 1e-6

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NODE_LIMIT = "node_limit"
TIME_LIMIT = "time_limit"


@dataclass
class MilpLimits:
    """Stopping limits; gap_rel closes |incumbent - bound| relative to the incumbent."""

    time_limit_s: float | None = None
    node_limit: int | None = None
    gap_rel: float = 1e-9


@dataclass
class MilpSolution:
    """Branch-and-bound result.

    With status "optimal", the incumbent is integer-feasible within 1e-6
    and |objective_value - best_bound| is within the gap tolerance. On a
    limit status the incumbent (possibly None) comes with a valid
    best_bound. best_bound is -inf for infeasible models.
    """

    status: str
    values: dict | None
    objective_value: float | None
    best_bound: float
    node_count: int


class _Node:
    __slots__ = ("lb", "ub", "estimate")

    def __init__(self, lb, ub, estimate):
        self.lb = lb
        self.ub = ub
        self.estimate = estimate


def solve_milp(m: MilpModel, callback=None, limits: MilpLimits | None = None,
               on_node=None) -> MilpSolution:
    """Maximise the model, enforcing integrality of non-continuous variables.

    callback, when given, is invoked with the candidate assignment (a dict
    over all variables, integer components rounded) at every
    integer-feasible point. It returns None or an empty list to accept the
    candidate, or a list of LinearConstraint rows to append to the model;
    in the latter case the candidate is discarded and its node re-solved.
    Returned rows must not cut off any integer point the caller considers
    optimal.

    on_node is a diagnostics hook called with each popped node's bound
    estimate, in pop order.
    """
    limits = limits or MilpLimits()
    t0 = time.perf_counter()

    variables = m.variables
    names = [v.name for v in variables]
    nstruct = len(names)
    int_cols = np.array([j for j, v in enumerate(variables) if v.kind != CONTINUOUS],
                        dtype=np.int64)
    for j in int_cols:
        v = variables[j]
        if not (np.isfinite(v.lower) and np.isfinite(v.upper)):
            raise ValueError(f"integer variable {v.name} must be bounded")

    rows = list(m.constraints)
    sf = lp.standard_form(variables, rows, m.objective)
    c_struct = sf.c[: nstruct]

    root = _Node(sf.lb[:nstruct].copy(), sf.ub[:nstruct].copy(), math.inf)
    heap = [(-math.inf, 0, root)]
    seq = 1
    inc_vec = None
    inc_val = -math.inf
    nodes = 0
    hit_limit = None

    while heap:
        if limits.time_limit_s is not None and time.perf_counter() - t0 >= limits.time_limit_s:
            hit_limit = TIME_LIMIT
            break
        if limits.node_limit is not None and nodes >= limits.node_limit:
            hit_limit = NODE_LIMIT
            break
        neg_est, _, node = heapq.heappop(heap)
        if on_node is not None:
            on_node(-neg_est)
        gap_abs = limits.gap_rel * (1.0 + abs(inc_val)) if inc_vec is not None else 0.0
        if inc_vec is not None and node.estimate <= inc_val + gap_abs:
            continue

        res = lp.solve_standard_form(sf, node.lb, node.ub)
        nodes += 1
        if res.status == lp.INFEASIBLE:
            continue
        if res.status == lp.UNBOUNDED:
            raise ValueError("LP relaxation is unbounded; the model is malformed")
        obj = res.objective
        node.estimate = min(node.estimate, obj)
        if inc_vec is not None and obj <= inc_val + gap_abs:
            continue

        xs = res.x[:nstruct]
        if int_cols.size:
            frac = np.abs(xs[int_cols] - np.rint(xs[int_cols]))
            worst = int(np.argmax(frac))
            max_frac = float(frac[worst])
        else:
            max_frac = 0.0

        if max_frac <= INT_TOL:
            cand = xs.copy()
            if int_cols.size:
                cand[int_cols] = np.rint(cand[int_cols])
            assignment = {nm: float(cand[j]) for j, nm in enumerate(names)}
            if callback is not None:
                cuts = callback(assignment)
                if cuts:
                    rows.extend(cuts)
                    sf = lp.standard_form(variables, rows, m.objective)
                    heapq.heappush(heap, (-node.estimate, seq, node))
                    seq += 1
                    continue
            val = float(c_struct @ cand)
            if val > inc_val:
                inc_val = val
                inc_vec = cand
            continue

        j = int(int_cols[worst])
        v = xs[j]
        down = _Node(node.lb.copy(), node.ub.copy(), obj)
        down.ub[j] = math.floor(v)
        up = _Node(node.lb.copy(), node.ub.copy(), obj)
        up.lb[j] = math.ceil(v)
        heapq.heappush(heap, (-obj, seq, down))
        heapq.heappush(heap, (-obj, seq + 1, up))
        seq += 2

    if hit_limit is not None:
        open_best = max((-entry[0] for entry in heap), default=-math.inf)
        best_bound = max(inc_val, open_best)
        values = {nm: float(inc_vec[j]) for j, nm in enumerate(names)} if inc_vec is not None else None
        objective_value = inc_val if inc_vec is not None else None
        return MilpSolution(hit_limit, values, objective_value, best_bound, nodes)

    if inc_vec is None:
        return MilpSolution(INFEASIBLE, None, None, -math.inf, nodes)
    values = {nm: float(inc_vec[j]) for j, nm in enumerate(names)}
    return MilpSolution(OPTIMAL, values, inc_val, inc_val, nodes)
