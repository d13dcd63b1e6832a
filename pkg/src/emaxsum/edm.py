"""Euclidean distance matrices and the quadratic selection objective.

The solver maximises f(x) = 0.5 * <Qx, x> over binary selection vectors,
where Q holds pairwise Euclidean distances. This module owns Q itself:
construction from coordinates, objective and tangent-plane evaluation, the
directional-concavity test, the two sufficient conditions under which the
tangent plane at y stays above f at a better point x, and a small Jacobi
eigensolver used to diagnose the spectral structure of distance matrices
(one positive eigenvalue; nonpositive quadratic form on zero-sum vectors).

Everything here is a pure function over immutable inputs, safe to call
from any number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Default absolute tolerance for sign tests on quadratic forms. Callers
# dealing with large operands pass a scaled value instead.
QUAD_TOL = 1e-9


def _as_vector(v, n: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have length {n}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class PointSet:
    """Locations v_1..v_n in R^s, stored as an (n, s) float array."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coords, dtype=float)
        if arr.ndim != 2:
            raise ValueError("coords must be a 2-d array of shape (n, s)")
        n, s = arr.shape
        if n < 1 or s < 1:
            raise ValueError(f"need n >= 1 points of dimension s >= 1, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("all coordinates must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @classmethod
    def from_list(cls, points) -> "PointSet":
        points = list(points)
        if not points:
            raise ValueError("need at least one point")
        dims = {len(p) for p in points}
        if len(dims) != 1:
            raise ValueError(f"points have mismatched dimensions: {sorted(dims)}")
        return cls(np.array([list(map(float, p)) for p in points]))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


@dataclass(frozen=True)
class DistanceMatrix:
    """Dense n-by-n matrix of pairwise distances.

    The container itself only enforces shape and finiteness so that
    diagnostics on malformed data (read from files, say) can be reported
    as messages rather than constructor failures; `diagnostics` performs
    the structural checks (symmetric, hollow, nonnegative).
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"entries must be square, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("all entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def diagnostics(self, tol: float = 1e-9) -> list[str]:
        """Human-readable violations of the distance-matrix invariants."""
        q = self.entries
        out = []
        asym = np.abs(q - q.T) > tol * (1.0 + np.abs(q))
        if asym.any():
            i, j = np.argwhere(asym)[0]
            out.append(f"matrix not symmetric at ({i + 1},{j + 1})")
        diag = np.abs(np.diagonal(q)) > tol
        if diag.any():
            i = int(np.argmax(diag))
            out.append(f"diagonal entry ({i + 1},{i + 1}) is {q[i, i]!r}, expected 0")
        neg = q < -tol
        if neg.any():
            i, j = np.argwhere(neg)[0]
            out.append(f"negative distance at ({i + 1},{j + 1})")
        return out


@dataclass(frozen=True)
class SpectralSignature:
    """Counts of eigenvalues by sign, plus the largest eigenvalue."""

    n_positive: int
    n_zero: int
    n_negative: int
    lambda_max: float


def build_edm(ps: PointSet) -> DistanceMatrix:
    """Pairwise Euclidean distances q_ij = |v_i - v_j|.

    The result is exactly symmetric and hollow (the same floating-point
    value is produced for (i, j) and (j, i), and the diagonal is zeroed
    explicitly). Distances are never rounded.
    """
    diff = ps.coords[:, None, :] - ps.coords[None, :, :]
    q = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(q, 0.0)
    return DistanceMatrix(q)


def objective(q: DistanceMatrix, x) -> float:
    """f(x) = 0.5 * <Qx, x>.

    On a binary x this equals the sum of pairwise distances between the
    selected indices.
    """
    xv = _as_vector(x, q.n, "x")
    return 0.5 * float(xv @ (q.entries @ xv))


def tangent_coefficients(q: DistanceMatrix, y) -> tuple[np.ndarray, float]:
    """Linear form of the tangent plane at y.

    Returns (gradient, offset) with gradient = Qy and
    offset = -0.5 * <Qy, y>, so that the tangent value at any x is
    <gradient, x> + offset.
    """
    yv = _as_vector(y, q.n, "y")
    g = q.entries @ yv
    return g, -0.5 * float(g @ yv)


def tangent_value(q: DistanceMatrix, y, x) -> float:
    """First-order expansion of f at y, evaluated at x: <Qy, x> - 0.5 <Qy, y>."""
    xv = _as_vector(x, q.n, "x")
    g, off = tangent_coefficients(q, y)
    return float(g @ xv) + off


def is_concave_direction(q: DistanceMatrix, u, tol: float = QUAD_TOL) -> bool:
    """True when <Qu, u> <= tol, i.e. f restricted to the line along u curves down."""
    uv = _as_vector(u, q.n, "u")
    if not uv.any():
        raise ValueError("direction must be nonzero")
    return float(uv @ (q.entries @ uv)) <= tol


def valid_by_cardinality(x, y, tol: float = QUAD_TOL) -> bool:
    """Cardinality rule: sum(x) <= sum(y).

    For componentwise nonnegative x, y with f(x) >= f(y), this condition
    guarantees the tangent plane at y lies on or above f at x.
    """
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if (xv < 0).any() or (yv < 0).any():
        raise ValueError("components must be nonnegative")
    return float(xv.sum()) <= float(yv.sum()) + tol


def valid_by_witness(q: DistanceMatrix, w, x, y, tol: float = QUAD_TOL) -> bool:
    """Witness rule: <Qw, x - y> <= 0 for a nonnegative, nonzero w.

    Under the same premises as the cardinality rule (x, y nonnegative and
    f(x) >= f(y)), a witness certifies that the tangent plane at y stays
    above f at x.
    """
    wv = _as_vector(w, q.n, "w")
    if (wv < 0).any():
        raise ValueError("witness must be componentwise nonnegative")
    if not wv.any():
        raise ValueError("witness must be nonzero")
    xv = _as_vector(x, q.n, "x")
    yv = _as_vector(y, q.n, "y")
    return float((q.entries @ wv) @ (xv - yv)) <= tol


def jacobi_eigenvalues(a: np.ndarray, rel_tol: float = 1e-10, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps run until the off-diagonal Frobenius norm drops below
    rel_tol * ||A||_F. Returns the eigenvalues in descending order.
    Dependency-free on purpose; adequate for the diagnostic scale this
    package needs (n up to a few hundred).
    """
    m = np.array(a, dtype=float)
    n = m.shape[0]
    if n == 1:
        return m.diagonal().copy()
    fro = float(np.linalg.norm(m))
    if fro == 0.0:
        return np.zeros(n)
    target = rel_tol * fro
    skip = target / (n * n)
    idx = np.arange(n)
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = float(np.sqrt((m[offdiag] ** 2).sum()))
        if off <= target:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apq = m[p, r]
                if abs(apq) <= skip:
                    continue
                theta = (m[r, r] - m[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                others = idx[(idx != p) & (idx != r)]
                mp = m[others, p].copy()
                mr = m[others, r].copy()
                m[others, p] = m[p, others] = c * mp - s * mr
                m[others, r] = m[r, others] = s * mp + c * mr
                m[p, p] -= t * apq
                m[r, r] += t * apq
                m[p, r] = m[r, p] = 0.0
    else:
        raise RuntimeError("Jacobi sweep limit reached without convergence")
    return np.sort(np.diagonal(m))[::-1].copy()


def spectral_signature(q: DistanceMatrix, rel_tol: float = 1e-8) -> SpectralSignature:
    """Eigenvalue sign counts of Q, classified against rel_tol * |lambda_max|.

    Distance matrices built from two or more distinct points have exactly
    one positive eigenvalue; this diagnostic lets tests assert that
    without pulling in an external eigensolver.
    """
    eig = jacobi_eigenvalues(q.entries, rel_tol)
    lam = float(eig[0])
    thr = rel_tol * abs(lam)
    n_pos = int((eig > thr).sum())
    n_neg = int((eig < -thr).sum())
    return SpectralSignature(n_pos, q.n - n_pos - n_neg, n_neg, lam)
