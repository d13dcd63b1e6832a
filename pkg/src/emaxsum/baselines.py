"""Exact baselines for cross-checking the cutting-plane solvers.

glover_model reformulates the quadratic objective exactly with one
continuous variable per row of the upper triangle of Q, solvable by any
MILP engine. brute_force enumerates the feasible selections outright and
is the independent oracle the test suite measures everything against; it
never calls the LP/MILP engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .model import (CONTINUOUS, EQ, GE, INTEGER, LE, EmspInstance,
                    LinearConstraint, MilpModel, VariableDecl)

_ROW_TOL = 1e-9


def glover_model(inst: EmspInstance) -> MilpModel:
    """Exact linear reformulation of the quadratic selection objective.

    For each i < n an auxiliary w_i captures x_i * sum_{j>i} q_ij x_j via
    w_i <= x_i * R_i and w_i <= sum_{j>i} q_ij x_j with R_i the row
    remainder sum; maximising sum(w) over the instance rows (plus the
    nonzero-selection row) equals maximising f. With n < 2 the objective
    is empty and the model's optimum is 0.
    """
    n = inst.n
    q = inst.q.entries
    names = inst.selection_names
    taken = {v.name for v in inst.selection_vars} | {v.name for v in inst.aux_vars}
    w_names = []
    w_decls = []
    rows = list(inst.constraints)
    rows.append(LinearConstraint({nm: 1.0 for nm in names}, GE, 1.0))
    for i in range(n - 1):
        wn = f"w{i + 1}"
        if wn in taken:
            raise ValueError(f"variable name {wn} already used by the instance")
        remainder = float(q[i, i + 1:].sum())
        w_names.append(wn)
        w_decls.append(VariableDecl.continuous(wn, 0.0, remainder))
        rows.append(LinearConstraint({wn: 1.0, names[i]: -remainder}, LE, 0.0))
        rows.append(LinearConstraint(
            {wn: 1.0, **{names[j]: -float(q[i, j]) for j in range(i + 1, n)}}, LE, 0.0))
    variables = tuple(inst.selection_vars) + tuple(inst.aux_vars) + tuple(w_decls)
    return MilpModel(variables, tuple(rows), {wn: 1.0 for wn in w_names})


@dataclass
class BruteForceResult:
    """Exhaustive enumeration outcome.

    enumerated counts the feasible nonzero selections; when it is zero the
    instance is infeasible and best_value is -inf. best_solutions lists
    every selection attaining the maximum within an absolute 1e-12 slack
    (scaled by the optimum's size).
    """

    best_value: float
    best_solutions: list
    enumerated: int

    @property
    def feasible(self) -> bool:
        return self.enumerated > 0


def _split_rows(inst: EmspInstance):
    sel = set(inst.selection_names)
    sel_rows, aux_rows = [], []
    for con in inst.constraints:
        (sel_rows if set(con.coefficients) <= sel else aux_rows).append(con)
    return sel_rows, aux_rows


def _gdpv_structure(inst: EmspInstance, aux_rows):
    """Recognise the variable-capacity structure: links t_i <= c_i x_i, one
    covering row sum(t) >= B, one budget row sum(a x + b t) <= K.

    Returns (caps, fixed, unit, B, K) or None when the rows do not match.
    """
    n = inst.n
    aux_names = [v.name for v in inst.aux_vars]
    if len(aux_names) != n:
        return None
    sel_names = list(inst.selection_names)
    pos = {nm: i for i, nm in enumerate(aux_names)}
    caps = np.full(n, np.nan)
    fixed = np.full(n, np.nan)
    unit = np.full(n, np.nan)
    cover = budget = None
    links = 0
    for con in aux_rows:
        keys = set(con.coefficients)
        if keys == set(aux_names) and con.sense == GE:
            if cover is not None or any(abs(con.coefficients[nm] - 1.0) > _ROW_TOL
                                        for nm in aux_names):
                return None
            cover = con.rhs
        elif keys == set(aux_names) | set(sel_names) and con.sense == LE:
            if budget is not None:
                return None
            for i, nm in enumerate(sel_names):
                fixed[i] = con.coefficients[nm]
            for nm in aux_names:
                unit[pos[nm]] = con.coefficients[nm]
            if (fixed < 0).any() or (unit < 0).any():
                return None
            budget = con.rhs
        elif len(keys) == 2 and con.sense == LE and abs(con.rhs) <= _ROW_TOL:
            t_part = keys & set(aux_names)
            x_part = keys & set(sel_names)
            if len(t_part) != 1 or len(x_part) != 1:
                return None
            tn, xn = t_part.pop(), x_part.pop()
            i = pos[tn]
            if sel_names[i] != xn:
                return None
            if abs(con.coefficients[tn] - 1.0) > _ROW_TOL or con.coefficients[xn] >= 0:
                return None
            caps[i] = -con.coefficients[xn]
            links += 1
        else:
            return None
    if cover is None or budget is None or links != n:
        return None
    for i, v in enumerate(inst.aux_vars):
        if v.kind != INTEGER or v.lower > _ROW_TOL:
            return None
        caps[i] = min(caps[i], v.upper)
    return caps, fixed, unit, float(cover), float(budget)


def _gdpv_feasible(sel_idx, caps, fixed, unit, cover, budget) -> bool:
    """Greedy exact check: fill the cheapest selected capacities first.

    The auxiliaries are integers without objective weight, so feasibility
    reduces to reaching the covering target at minimum unit cost within
    the remaining budget. Unit costs are nonnegative, hence filling
    cheapest-first over integer capacities is exact.
    """
    room = budget - fixed[sel_idx].sum()
    if room < -_ROW_TOL:
        return False
    target = math.ceil(cover - _ROW_TOL)
    if target <= 0:
        return True
    whole = np.floor(caps[sel_idx] + _ROW_TOL).astype(np.int64)
    if whole.sum() < target:
        return False
    order = np.argsort(unit[sel_idx], kind="stable")
    cost = 0.0
    left = target
    for k in order:
        take = min(left, int(whole[k]))
        cost += take * unit[sel_idx][k]
        left -= take
        if left == 0:
            break
    return cost <= room + _ROW_TOL


def _aux_feasible_enumerate(x, inst: EmspInstance, aux_rows, combo_guard=200_000) -> bool:
    """Joint enumeration over small auxiliary ranges; exact but exponential."""
    sel = dict(zip(inst.selection_names, x))
    ranges = []
    total = 1
    for v in inst.aux_vars:
        if v.kind == CONTINUOUS:
            raise ValueError("cannot enumerate continuous auxiliaries")
        lo = math.ceil(v.lower - _ROW_TOL)
        hi = math.floor(v.upper + _ROW_TOL)
        ranges.append(range(lo, hi + 1))
        total *= max(0, hi - lo + 1)
        if total > combo_guard:
            raise ValueError("auxiliary ranges too large to enumerate")
    aux_names = [v.name for v in inst.aux_vars]
    for combo in product(*ranges):
        values = {**sel, **dict(zip(aux_names, combo))}
        ok = True
        for con in aux_rows:
            lhs = sum(c * values[nm] for nm, c in con.coefficients.items())
            if con.sense == LE and lhs > con.rhs + _ROW_TOL:
                ok = False
            elif con.sense == GE and lhs < con.rhs - _ROW_TOL:
                ok = False
            elif con.sense == EQ and abs(lhs - con.rhs) > _ROW_TOL:
                ok = False
            if not ok:
                break
        if ok:
            return True
    return False


def brute_force(inst: EmspInstance, max_n: int = 25, aux_mode: str = "auto") -> BruteForceResult:
    """Exact maximum of f over the feasible nonzero selections by enumeration.

    Auxiliary variables are handled either by the greedy variable-capacity
    check when the instance matches that structure, or by joint
    enumeration over their (small) integer ranges. aux_mode forces one
    route ("greedy" / "enumerate") for cross-checks; "auto" picks.
    """
    n = inst.n
    if n > max_n:
        raise ValueError(f"instance too large to enumerate (n={n} > {max_n})")
    q = inst.q.entries
    sel_rows, aux_rows = _split_rows(inst)

    masks = np.arange(1, 2 ** n, dtype=np.int64)
    x_all = ((masks[:, None] >> np.arange(n)) & 1).astype(float)
    keep = np.ones(len(masks), dtype=bool)
    for con in sel_rows:
        coefs = np.zeros(n)
        for j, nm in enumerate(inst.selection_names):
            coefs[j] = con.coefficients.get(nm, 0.0)
        lhs = x_all @ coefs
        if con.sense == LE:
            keep &= lhs <= con.rhs + _ROW_TOL
        elif con.sense == GE:
            keep &= lhs >= con.rhs - _ROW_TOL
        else:
            keep &= np.abs(lhs - con.rhs) <= _ROW_TOL
    survivors = x_all[keep]

    if aux_rows:
        structure = _gdpv_structure(inst, aux_rows) if aux_mode in ("auto", "greedy") else None
        if aux_mode == "greedy" and structure is None:
            raise ValueError("instance does not match the variable-capacity structure")
        flags = np.zeros(len(survivors), dtype=bool)
        for i, x in enumerate(survivors):
            sel_idx = np.flatnonzero(x > 0.5)
            if structure is not None:
                flags[i] = _gdpv_feasible(sel_idx, *structure)
            else:
                flags[i] = _aux_feasible_enumerate(x, inst, aux_rows)
        survivors = survivors[flags]

    enumerated = len(survivors)
    if enumerated == 0:
        return BruteForceResult(-math.inf, [], 0)
    vals = 0.5 * np.einsum("ij,jk,ik->i", survivors, q, survivors)
    best = float(vals.max())
    tol = 1e-12 * (1.0 + abs(best))
    winners = [tuple(int(v) for v in survivors[i]) for i in np.flatnonzero(vals >= best - tol)]
    return BruteForceResult(best, winners, enumerated)
