"""Declarative constraint systems for the selection problem.

Variable declarations, linear rows, the problem instance (points, distance
matrix, selection and auxiliary variables, polyhedral rows), feasibility
checking, and the generic mixed-integer model container consumed by the
embedded LP/MILP engine.

Instances are treated as immutable after construction; every function here
is a pure read.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .edm import DistanceMatrix, PointSet, build_edm, objective

BINARY = "binary"
INTEGER = "integer"
CONTINUOUS = "continuous"
_KINDS = (BINARY, INTEGER, CONTINUOUS)

LE = "<="
GE = ">="
EQ = "="
_SENSES = (LE, GE, EQ)

# Reserved for the epigraph variable of master models.
THETA = "theta"


@dataclass(frozen=True)
class VariableDecl:
    """A named decision variable with kind and bounds."""

    name: str
    kind: str
    lower: float
    upper: float

    def __post_init__(self):
        if not self.name or not isinstance(self.name, str):
            raise ValueError("variable name must be a nonempty string")
        if self.kind not in _KINDS:
            raise ValueError(f"unknown variable kind {self.kind!r}")
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi) or lo > hi:
            raise ValueError(f"invalid bounds [{lo}, {hi}] for {self.name}")
        if self.kind == BINARY and (lo, hi) != (0.0, 1.0):
            raise ValueError(f"binary variable {self.name} must have bounds {{0, 1}}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def binary(cls, name: str) -> "VariableDecl":
        return cls(name, BINARY, 0.0, 1.0)

    @classmethod
    def integer(cls, name: str, lower: float, upper: float) -> "VariableDecl":
        return cls(name, INTEGER, lower, upper)

    @classmethod
    def continuous(cls, name: str, lower: float, upper: float) -> "VariableDecl":
        return cls(name, CONTINUOUS, lower, upper)


@dataclass(frozen=True)
class LinearConstraint:
    """A sparse linear row: sum(coefficients[v] * v) <sense> rhs."""

    coefficients: dict
    sense: str
    rhs: float

    def __post_init__(self):
        if self.sense not in _SENSES:
            raise ValueError(f"unknown sense {self.sense!r}")
        coeffs = dict(self.coefficients)
        if not coeffs:
            raise ValueError("constraint must reference at least one variable")
        vals = np.array(list(coeffs.values()), dtype=float)
        if not np.isfinite(vals).all() or not np.isfinite(self.rhs):
            raise ValueError("constraint values must be finite")
        if not vals.any():
            raise ValueError("constraint must have at least one nonzero coefficient")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "rhs", float(self.rhs))


@dataclass(frozen=True)
class MilpModel:
    """Generic mixed-integer linear model, always maximisation."""

    variables: tuple
    constraints: tuple
    objective: dict

    def __post_init__(self):
        variables = tuple(self.variables)
        constraints = tuple(self.constraints)
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names in model")
        declared = set(names)
        for con in constraints:
            unknown = set(con.coefficients) - declared
            if unknown:
                raise ValueError(f"constraint references undeclared variables: {sorted(unknown)}")
        obj = dict(self.objective)
        unknown = set(obj) - declared
        if unknown:
            raise ValueError(f"objective references undeclared variables: {sorted(unknown)}")
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "constraints", constraints)
        object.__setattr__(self, "objective", obj)


@dataclass
class EmspInstance:
    """A max-sum selection problem: distance matrix plus a polyhedron.

    Exactly one binary selection variable per point enters the objective;
    auxiliary variables (integer or continuous) may appear in constraints
    only. The all-zeros selection is excluded from the solver's feasible
    region; the solver layer injects an explicit sum >= 1 row.
    """

    q: DistanceMatrix
    selection_vars: tuple
    aux_vars: tuple = ()
    constraints: tuple = ()
    points: PointSet | None = None
    name: str = ""
    q_source: str = "computed"  # "computed" from points, or "read" from a file
    blocks: tuple | None = None  # native-format building blocks (see instances)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.selection_vars = tuple(self.selection_vars)
        self.aux_vars = tuple(self.aux_vars)
        self.constraints = tuple(self.constraints)

    @classmethod
    def from_points(cls, points, constraints=(), aux_vars=(), name="") -> "EmspInstance":
        ps = points if isinstance(points, PointSet) else PointSet.from_list(points)
        q = build_edm(ps)
        sel = tuple(VariableDecl.binary(f"x{i + 1}") for i in range(ps.n))
        return cls(q=q, selection_vars=sel, aux_vars=tuple(aux_vars),
                   constraints=tuple(constraints), points=ps, name=name)

    @property
    def n(self) -> int:
        return self.q.n

    @property
    def selection_names(self) -> tuple:
        return tuple(v.name for v in self.selection_vars)

    def selection_vector(self, assignment) -> np.ndarray:
        """The selection part of an assignment, in declaration order."""
        return np.array([float(assignment[v.name]) for v in self.selection_vars])

    def objective_value(self, x) -> float:
        """f on a selection vector (binary or fractional)."""
        return objective(self.q, x)


def validate(inst: EmspInstance) -> list[str]:
    """All invariant violations of an instance as human-readable messages.

    Returns an empty list when the instance is well formed. Never raises;
    meant for surfacing problems in data read from files.
    """
    out = list(inst.q.diagnostics())
    n = inst.q.n

    if len(inst.selection_vars) != n:
        out.append(f"expected {n} selection variables, found {len(inst.selection_vars)}")
    for v in inst.selection_vars:
        if v.kind != BINARY:
            out.append(f"selection variable {v.name} is {v.kind}, expected binary")

    names = [v.name for v in inst.selection_vars] + [v.name for v in inst.aux_vars]
    if len(set(names)) != len(names):
        out.append("duplicate variable names")
    if THETA in names:
        out.append(f"variable name {THETA!r} is reserved for the master model")

    if inst.points is not None:
        if inst.points.n != n:
            out.append(f"{inst.points.n} points but {n}x{n} distance matrix")
        else:
            rebuilt = build_edm(inst.points).entries
            bad = np.abs(rebuilt - inst.q.entries) > 1e-9 * (1.0 + np.abs(rebuilt))
            if bad.any():
                i, j = np.argwhere(bad)[0]
                out.append(f"distance matrix disagrees with coordinates at ({i + 1},{j + 1})")
        if n <= 64:
            q = inst.q.entries
            for k in range(n):
                if (q > q[:, [k]] + q[[k], :] + 1e-9).any():
                    out.append(f"triangle inequality violated through point {k + 1}")
                    break

    declared = set(names)
    sel_names = set(v.name for v in inst.selection_vars)
    for idx, con in enumerate(inst.constraints):
        unknown = set(con.coefficients) - declared
        if unknown:
            out.append(f"constraint {idx + 1} references unknown variables: {sorted(unknown)}")

    for v in inst.aux_vars:
        if not np.isfinite(v.lower) or not np.isfinite(v.upper):
            out.append(f"aux variable {v.name} has an infinite bound; "
                       "a bounded feasible region is assumed")

    # Pre-scan: a <=-row with positive weights on every selection variable
    # and a right-hand side below the smallest weight kills all selections.
    for con in inst.constraints:
        if con.sense != LE or set(con.coefficients) != sel_names or not sel_names:
            continue
        coefs = np.array([con.coefficients[nm] for nm in sel_names], dtype=float)
        if (coefs > 0).all() and con.rhs < coefs.min() - 1e-9:
            out.append("no nonzero selection is feasible")

    return out


def is_feasible(inst: EmspInstance, assignment, tol: float = 1e-6) -> bool:
    """Membership test for the solver's feasible region.

    Checks bounds, integrality of binary/integer variables, every
    constraint within tol, and that at least one selection variable is on.
    Raises KeyError when the assignment misses a declared variable.
    """
    for v in tuple(inst.selection_vars) + tuple(inst.aux_vars):
        val = float(assignment[v.name])
        if val < v.lower - tol or val > v.upper + tol:
            return False
        if v.kind in (BINARY, INTEGER) and abs(val - round(val)) > tol:
            return False
    for con in inst.constraints:
        lhs = sum(c * float(assignment[nm]) for nm, c in con.coefficients.items())
        if con.sense == LE and lhs > con.rhs + tol:
            return False
        if con.sense == GE and lhs < con.rhs - tol:
            return False
        if con.sense == EQ and abs(lhs - con.rhs) > tol:
            return False
    picked = sum(round(float(assignment[v.name])) for v in inst.selection_vars)
    return picked >= 1


def max_cardinality_model(inst: EmspInstance) -> MilpModel:
    """MILP maximising the number of selected points over the instance rows.

    Its optimum seeds both cutting algorithms: every feasible selection
    has cardinality at most the optimum, so the tangent at an optimal
    selection is safe for the whole feasible set.
    """
    return MilpModel(
        variables=tuple(inst.selection_vars) + tuple(inst.aux_vars),
        constraints=tuple(inst.constraints),
        objective={v.name: 1.0 for v in inst.selection_vars},
    )
