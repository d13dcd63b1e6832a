"""Bounded-variable primal simplex for dense linear programs.

Rows Ax {<=, >=, =} b with box bounds are converted to equality standard
form with one slack column per row, then solved by a two-phase primal
simplex over the bounded columns. Pricing is Dantzig (most violating
reduced cost) until a run of degenerate pivots trips the Bland
anti-cycling rule, which is provably finite. Ties break on the lowest
index everywhere, the refactorisation schedule is fixed, and no
randomisation is used, so identical inputs give identical runs.

Optimality conditions (primal feasibility and reduced-cost signs) are
re-verified at every termination; a violation raises LpNumericalError
rather than returning a wrong answer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GE, LE, MilpModel

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEAS_TOL = 1e-7
COST_TOL = 1e-7
PIVOT_TOL = 1e-9
# Blocking threshold for the ratio test. Deliberately far below PIVOT_TOL:
# leaving even near-zero column entries unblocked lets long steps push basic
# values past their bounds by more than the feasibility tolerance.
_RATIO_TOL = 1e-12
_REFACTOR_EVERY = 32

# Column states.
_AT_LOWER, _AT_UPPER, _FREE, _BASIC = 0, 1, 2, 3

# Diagnostic counters; terminations are verified in-line and failures raise.
VERIFY_STATS = {"terminations": 0}


class LpNumericalError(RuntimeError):
    """The simplex could not certify its answer after the anti-cycling fallback."""


@dataclass
class LpSolution:
    """Result of an LP solve.

    objective_value is NaN unless status is "optimal". For an optimal
    solution, primal feasibility holds within 1e-7 and the objective is
    consistent with the values within 1e-7 relative.
    """

    status: str
    values: dict
    objective_value: float


@dataclass
class StandardForm:
    """max c'z over Az = b, lb <= z <= ub; columns are variables then slacks."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    names: list
    nstruct: int


def standard_form(variables, constraints, objective) -> StandardForm:
    """Compile declarative rows into dense equality standard form.

    Slack bounds encode the sense: [0, inf) for <=, (-inf, 0] for >=,
    and [0, 0] for equality rows.
    """
    names = [v.name for v in variables]
    col = {nm: j for j, nm in enumerate(names)}
    nstruct = len(names)
    m = len(constraints)
    a = np.zeros((m, nstruct + m))
    b = np.zeros(m)
    lb = np.empty(nstruct + m)
    ub = np.empty(nstruct + m)
    for j, v in enumerate(variables):
        lb[j], ub[j] = v.lower, v.upper
    for r, con in enumerate(constraints):
        for nm, coef in con.coefficients.items():
            a[r, col[nm]] = coef
        s = nstruct + r
        a[r, s] = 1.0
        b[r] = con.rhs
        if con.sense == LE:
            lb[s], ub[s] = 0.0, np.inf
        elif con.sense == GE:
            lb[s], ub[s] = -np.inf, 0.0
        else:
            lb[s], ub[s] = 0.0, 0.0
    c = np.zeros(nstruct + m)
    for nm, coef in objective.items():
        c[col[nm]] = coef
    return StandardForm(a, b, c, lb, ub, names, nstruct)


@dataclass
class SimplexResult:
    status: str
    x: np.ndarray
    objective: float


class _Tableau:
    """Mutable simplex state over an extended column set (incl. artificials)."""

    def __init__(self, a, b, lb, ub):
        self.a = a
        self.b = b
        self.lb = lb
        self.ub = ub
        self.m, self.ntot = a.shape
        self.x = np.zeros(self.ntot)
        self.state = np.full(self.ntot, _AT_LOWER, dtype=np.int8)
        self.basis = np.zeros(self.m, dtype=np.int64)
        self.binv = np.eye(self.m)
        self._pivots = 0

    def refactor(self):
        if self.m == 0:
            return
        try:
            self.binv = np.linalg.solve(self.a[:, self.basis], np.eye(self.m))
        except np.linalg.LinAlgError as exc:
            raise LpNumericalError("singular basis during refactorisation") from exc
        self.recompute_basics()

    def recompute_basics(self):
        if self.m == 0:
            return
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = self.binv @ (self.b - self.a @ xn)

    def eta_update(self, d, row):
        piv = d[row]
        br = self.binv[row] / piv
        self.binv -= np.outer(d, br)
        self.binv[row] = br
        self._pivots += 1
        if self._pivots % _REFACTOR_EVERY == 0:
            self.refactor()


def _iterate(t: _Tableau, c: np.ndarray, max_iter: int, bland: bool = False,
             pivot_safety: float = 1e-8) -> str:
    """Run primal simplex to optimality or unboundedness on the current basis."""
    fixed = t.lb == t.ub
    ctol = COST_TOL * (1.0 + float(np.abs(c).max(initial=0.0)))
    degen = 0
    banned = np.zeros(t.ntot, dtype=bool)
    for _ in range(max_iter):
        y = t.binv.T @ c[t.basis] if t.m else np.zeros(0)
        z = c - (y @ t.a if t.m else 0.0)
        z[t.basis] = 0.0
        can_up = ((t.state == _AT_LOWER) | (t.state == _FREE)) & ~fixed & (z > ctol)
        can_dn = ((t.state == _AT_UPPER) | (t.state == _FREE)) & ~fixed & (z < -ctol)
        elig = can_up | can_dn
        if not elig.any():
            return OPTIMAL
        elig &= ~banned
        if not elig.any():
            # Every improving column was refused for pivot safety.
            raise LpNumericalError("no numerically safe pivot available")
        if bland:
            j = int(np.argmax(elig))
        else:
            j = int(np.argmax(np.where(elig, np.abs(z), -1.0)))
        up = bool(can_up[j])
        dirn = 1.0 if up else -1.0

        # Step limit from the entering column's own range.
        t_own = t.ub[j] - t.lb[j] if np.isfinite(t.lb[j]) and np.isfinite(t.ub[j]) else np.inf

        d = t.binv @ t.a[:, j] if t.m else np.zeros(0)
        for refreshed in (False, True):
            delta = -dirn * d  # change in each basic value per unit step

            # Step limits from basic variables hitting their bounds.
            ratios = np.full(t.m, np.inf)
            xb = t.x[t.basis]
            lo = t.lb[t.basis]
            hi = t.ub[t.basis]
            dec = delta < -_RATIO_TOL
            if dec.any():
                with np.errstate(invalid="ignore"):
                    ratios[dec] = np.where(np.isfinite(lo[dec]),
                                           (xb[dec] - lo[dec]) / (-delta[dec]), np.inf)
            inc = delta > _RATIO_TOL
            if inc.any():
                with np.errstate(invalid="ignore"):
                    ratios[inc] = np.where(np.isfinite(hi[inc]),
                                           (hi[inc] - xb[inc]) / delta[inc], np.inf)
            np.maximum(ratios, 0.0, out=ratios)

            if t.m and ratios.min() < np.inf:
                rmin = float(ratios.min())
                if bland:
                    ties = np.flatnonzero(ratios <= rmin + 1e-15)
                    row = int(ties[np.argmin(t.basis[ties])])
                else:
                    # Among near-minimal ratios prefer the largest pivot
                    # element: keeps the basis update well conditioned when a
                    # tiny-entry row happens to block first. The window is
                    # small enough that snapping the leaving variable to its
                    # bound stays far below the feasibility tolerance.
                    window = 1e-11 if rmin <= 1e-11 else 1e-12 * (1.0 + rmin)
                    ties = np.flatnonzero(ratios <= rmin + window)
                    strength = np.abs(delta[ties])
                    row = int(ties[np.argmax(strength)])
            else:
                rmin, row = np.inf, -1

            # A small winning pivot may be stale update noise rather than a
            # real blocking entry: refactorise once and redo the ratio test
            # on exact numbers before trusting it.
            if refreshed or row < 0 or not (rmin < t_own and abs(delta[row]) < 1e-6):
                break
            t.refactor()
            d = t.binv @ t.a[:, j]

        if row >= 0 and rmin < t_own and abs(delta[row]) < pivot_safety:
            # Swapping this column in would make the basis nearly singular;
            # refuse it until a pivot elsewhere changes the geometry.
            banned[j] = True
            continue

        step = min(rmin, t_own)
        if step == np.inf:
            return UNBOUNDED
        if step <= PIVOT_TOL:
            degen += 1
            if degen > 5 * t.ntot:
                bland = True
                banned[:] = False
        else:
            degen = 0
        banned[:] = False

        if step > 0.0:
            t.x[t.basis] += step * delta
            t.x[j] += dirn * step
        if t_own <= rmin:
            # Bound flip: the entering column crosses its range, no basis change.
            t.state[j] = _AT_UPPER if up else _AT_LOWER
            t.x[j] = t.ub[j] if up else t.lb[j]
            continue
        leaving = t.basis[row]
        if delta[row] < 0.0:
            t.x[leaving] = t.lb[leaving]
            t.state[leaving] = _AT_LOWER
        else:
            t.x[leaving] = t.ub[leaving]
            t.state[leaving] = _AT_UPPER
        t.basis[row] = j
        t.state[j] = _BASIC
        t.eta_update(d, row)
    raise LpNumericalError("simplex iteration limit reached")


def _drive_out_artificials(t: _Tableau, ncols: int):
    """Pivot basic artificial columns out of the basis where possible.

    Rows whose artificial cannot leave are linearly dependent; their
    artificial stays basic at zero with a fixed [0, 0] range, which is
    harmless.
    """
    for row in range(t.m):
        col = t.basis[row]
        if col < ncols:
            continue
        coeffs = t.binv[row] @ t.a[:, :ncols]
        cand = np.flatnonzero((np.abs(coeffs) > 1e-7) & (t.state[:ncols] != _BASIC)
                              & (t.lb[:ncols] != t.ub[:ncols]))
        if cand.size == 0:
            continue
        j = int(cand[0])
        d = t.binv @ t.a[:, j]
        t.basis[row] = j
        t.state[j] = _BASIC
        t.state[col] = _AT_LOWER
        t.x[col] = 0.0
        t.eta_update(d, row)


def _verify(t: _Tableau, c: np.ndarray, ncols: int):
    """Check primal feasibility and reduced-cost signs; raise on violation.

    Bounds are checked on the real columns only; any tolerated residue in
    artificial columns shows up in the row-residual check instead.
    """
    scale = 1.0 + float(np.abs(t.b).max()) if t.m else 1.0
    resid = t.a[:, :] @ t.x - t.b if t.m else np.zeros(0)
    if resid.size and np.abs(resid).max() > FEAS_TOL * scale:
        raise LpNumericalError("primal residual too large at termination")
    lo_viol = (t.lb - t.x)[:ncols]
    hi_viol = (t.x - t.ub)[:ncols]
    bscale = 1.0 + np.abs(t.x[:ncols])
    if (lo_viol > FEAS_TOL * bscale).any() or (hi_viol > FEAS_TOL * bscale).any():
        raise LpNumericalError("bound violation at termination")
    y = t.binv.T @ c[t.basis] if t.m else np.zeros(0)
    z = c - (y @ t.a if t.m else 0.0)
    cscale = 1.0 + float(np.abs(c).max())
    bad_lo = (t.state == _AT_LOWER) & (t.lb != t.ub) & (z > COST_TOL * cscale)
    bad_hi = (t.state == _AT_UPPER) & (t.lb != t.ub) & (z < -COST_TOL * cscale)
    bad_fr = (t.state == _FREE) & (np.abs(z) > COST_TOL * cscale)
    if bad_lo.any() or bad_hi.any() or bad_fr.any():
        raise LpNumericalError("reduced-cost optimality conditions violated")
    VERIFY_STATS["terminations"] += 1


def solve_arrays(a, b, c, lb, ub) -> SimplexResult:
    """Two-phase simplex on equality-form arrays. Deterministic.

    Expects the trailing m columns to form the slack identity. A failed
    termination check walks a fixed retry ladder (Dantzig pricing with
    pivot-safety refusals, then Bland, then Bland accepting any pivot);
    only exhausting the ladder raises.
    """
    last = None
    for bland, safety in ((False, 1e-8), (True, 1e-8), (True, 0.0)):
        try:
            return _solve_arrays_once(a, b, c, lb, ub, bland=bland, pivot_safety=safety)
        except LpNumericalError as exc:
            last = exc
    raise last


def _solve_arrays_once(a, b, c, lb, ub, bland: bool, pivot_safety: float) -> SimplexResult:
    m, ncols = a.shape
    start = np.where(np.isfinite(lb), lb, np.where(np.isfinite(ub), ub, 0.0))
    state = np.where(np.isfinite(lb), _AT_LOWER,
                     np.where(np.isfinite(ub), _AT_UPPER, _FREE)).astype(np.int8)
    max_iter = 20000 + 200 * (m + ncols)

    resid = b - a @ start
    # Rows whose slack can absorb the residual start with a basic slack;
    # the rest get an artificial column signed to keep it nonnegative.
    basis = np.zeros(m, dtype=np.int64)
    art_rows = []
    for r in range(m):
        s = ncols - m + r  # slack column of row r
        if lb[s] - FEAS_TOL <= resid[r] <= ub[s] + FEAS_TOL:
            basis[r] = s
        else:
            art_rows.append(r)
    nart = len(art_rows)
    if nart:
        art = np.zeros((m, nart))
        for k, r in enumerate(art_rows):
            art[r, k] = 1.0 if resid[r] >= 0 else -1.0
        a_ext = np.hstack([a, art])
        lb_ext = np.concatenate([lb, np.zeros(nart)])
        ub_ext = np.concatenate([ub, np.full(nart, np.inf)])
    else:
        a_ext, lb_ext, ub_ext = a, lb, ub

    t = _Tableau(a_ext, b, lb_ext, ub_ext)
    t.x[:ncols] = start
    t.state[:ncols] = state
    t.basis = basis
    for k, r in enumerate(art_rows):
        t.basis[r] = ncols + k
    t.state[t.basis] = _BASIC
    t.refactor()

    if nart:
        c1 = np.zeros(ncols + nart)
        c1[ncols:] = -1.0
        # Infeasibility verdicts must be crisp: the acceptance line sits far
        # above floating-point residual noise and far below any genuine
        # violation, and a borderline first pass is re-priced on a freshly
        # factorised basis before deciding.
        strict = 1e-9 * (1.0 + float(np.abs(b).max(initial=0.0)))
        for _ in range(2):
            status = _iterate(t, c1, max_iter, bland=bland, pivot_safety=pivot_safety)
            if status != OPTIMAL:
                raise LpNumericalError("phase 1 ended without optimality")
            t.refactor()
            if float(t.x[ncols:].sum()) <= strict:
                break
        if float(t.x[ncols:].sum()) > strict:
            return SimplexResult(INFEASIBLE, t.x[:ncols].copy(), float("nan"))
        t.ub[ncols:] = 0.0
        _drive_out_artificials(t, ncols)

    c2 = np.zeros(t.ntot)
    c2[:ncols] = c
    status = _iterate(t, c2, max_iter, bland=bland, pivot_safety=pivot_safety)
    if status == UNBOUNDED:
        return SimplexResult(UNBOUNDED, t.x[:ncols].copy(), float("nan"))
    t.refactor()
    _verify(t, c2, ncols)
    x = t.x[:ncols].copy()
    return SimplexResult(OPTIMAL, x, float(c @ x))


def solve_standard_form(sf: StandardForm, lb_struct=None, ub_struct=None) -> SimplexResult:
    """Solve a compiled standard form, optionally overriding structural bounds."""
    lb = sf.lb
    ub = sf.ub
    if lb_struct is not None or ub_struct is not None:
        lb = sf.lb.copy()
        ub = sf.ub.copy()
        if lb_struct is not None:
            lb[: sf.nstruct] = lb_struct
        if ub_struct is not None:
            ub[: sf.nstruct] = ub_struct
    return solve_arrays(sf.a, sf.b, sf.c, lb, ub)


def solve_lp(m: MilpModel) -> LpSolution:
    """Optimal basic solution of the model's continuous relaxation.

    Integrality is ignored; binary and integer declarations contribute
    their bounds only. Optimality conditions are verified before the
    result is returned.
    """
    sf = standard_form(m.variables, m.constraints, m.objective)
    res = solve_standard_form(sf)
    values = {nm: float(res.x[j]) for j, nm in enumerate(sf.names)}
    if res.status != OPTIMAL:
        return LpSolution(res.status, values, float("nan"))
    return LpSolution(OPTIMAL, values, res.objective)
