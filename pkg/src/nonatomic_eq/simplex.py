"""Geometry of the action simplex.

Points of the simplex are plain read-only ``numpy`` vectors; :func:`simplex_point`
is the validating constructor.  Convex subsets (whole simplex, lower-bounded
simplex, boxes, vertex hulls) share the :class:`ConvexSet` interface.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

SUM_TOL = 1e-12

Vector = NDArray[np.float64]


class SimplexError(ValueError):
    """Raised for invalid simplex points or empty convex sets."""


def simplex_point(weights: ArrayLike) -> Vector:
    """Validate ``weights`` as a point of the simplex and return a frozen copy.

    Entries may undershoot zero or miss the unit sum by at most ``SUM_TOL``;
    the result is clipped and renormalized.
    """
    x = np.array(weights, dtype=float).ravel()
    if x.size < 2:
        raise SimplexError("a simplex point needs at least two actions")
    if not np.all(np.isfinite(x)):
        raise SimplexError(f"non-finite weights: {x}")
    if x.min() < -SUM_TOL:
        raise SimplexError(f"negative weight {x.min()!r}")
    total = x.sum()
    if abs(total - 1.0) > SUM_TOL:
        raise SimplexError(f"weights sum to {total!r}, not 1")
    x = np.clip(x, 0.0, None)
    x /= x.sum()
    x.flags.writeable = False
    return x


def barycenter(n: int) -> Vector:
    return simplex_point(np.full(n, 1.0 / n))


def vertex(n: int, a: int) -> Vector:
    e = np.zeros(n)
    e[a] = 1.0
    return simplex_point(e)


def distance(x: ArrayLike, y: ArrayLike) -> float:
    """Euclidean distance between two points of the same dimension."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise SimplexError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(np.linalg.norm(x - y))


def project(v: ArrayLike) -> Vector:
    """Euclidean projection onto the simplex (sort-based, exact)."""
    v = np.asarray(v, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise SimplexError(f"cannot project non-finite vector {v}")
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, n + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    w = np.maximum(v - theta, 0.0)
    w /= w.sum()
    return w


def project_rows_onto_faces(v: NDArray, support: NDArray) -> NDArray:
    """Project each row of ``v`` onto the face of the simplex spanned by ``support``.

    ``support`` is a boolean mask with the shape of ``v``; every row must have at
    least one ``True`` entry.
    """
    big = np.where(support, v, -np.inf)
    u = -np.sort(-big, axis=1)
    finite = np.isfinite(u)
    u0 = np.where(finite, u, 0.0)
    css = np.cumsum(u0, axis=1) - 1.0
    k = np.arange(1, v.shape[1] + 1)
    cond = finite & (u0 - css / k > 0)
    rho = v.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(v.shape[0]), rho] / (rho + 1)
    out = np.where(support, np.maximum(v - theta[:, None], 0.0), 0.0)
    return out / out.sum(axis=1, keepdims=True)


def _project_box_simplex(v: Vector, lower: Vector, upper: Vector) -> Vector:
    # g(tau) = sum clip(v - tau, l, u) is piecewise linear and nonincreasing;
    # locate the segment where it crosses 1 and interpolate.
    breaks = np.unique(np.concatenate([v - lower, v - upper]))

    def g(tau: float) -> float:
        return float(np.clip(v - tau, lower, upper).sum())

    vals = np.array([g(t) for t in breaks])
    # vals is nonincreasing in breaks
    idx = np.searchsorted(-vals, -1.0, side="left")
    if idx == 0:
        tau = breaks[0]
    elif idx >= len(breaks):
        tau = breaks[-1]
    else:
        t0, t1 = breaks[idx - 1], breaks[idx]
        g0, g1 = vals[idx - 1], vals[idx]
        tau = t0 if g0 == g1 else t0 + (g0 - 1.0) * (t1 - t0) / (g0 - g1)
    return np.clip(v - tau, lower, upper)


class ConvexSet:
    """A nonempty compact convex subset of the simplex."""

    n: int

    def project(self, v: ArrayLike) -> Vector:
        raise NotImplementedError

    def contains(self, x: ArrayLike, tol: float = 1e-12) -> bool:
        return self.distance(x) <= tol

    def distance(self, x: ArrayLike) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(self.project(x) - x))

    def min_coordinate(self) -> float:
        """Smallest coordinate attained anywhere in the set (a lower bound)."""
        raise NotImplementedError


@dataclass(frozen=True)
class Box(ConvexSet):
    """``{x in simplex : lower <= x <= upper}``."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size < 2:
            raise SimplexError("box bounds must be vectors of equal length >= 2")
        if np.any(lo < 0) or np.any(hi > 1) or np.any(lo > hi):
            raise SimplexError(f"invalid box bounds {self.lower} / {self.upper}")
        if lo.sum() > 1 + SUM_TOL or hi.sum() < 1 - SUM_TOL:
            raise SimplexError("box does not intersect the simplex")
        object.__setattr__(self, "lower", tuple(float(a) for a in lo))
        object.__setattr__(self, "upper", tuple(float(a) for a in hi))

    @property
    def n(self) -> int:
        return len(self.lower)

    def project(self, v: ArrayLike) -> Vector:
        v = np.asarray(v, dtype=float).ravel()
        if v.size != self.n:
            raise SimplexError(f"dimension mismatch: {v.size} vs {self.n}")
        return _project_box_simplex(v, np.asarray(self.lower), np.asarray(self.upper))

    def min_coordinate(self) -> float:
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        # coordinate i can drop to max(l_i, 1 - sum of other uppers)
        return float(np.min(np.maximum(lo, 1.0 - (hi.sum() - hi))))


def whole_simplex(n: int) -> Box:
    return Box((0.0,) * n, (1.0,) * n)


def lower_bounded(n: int, delta: float) -> Box:
    """The set of distributions with every coordinate at least ``delta``."""
    if not 0 < delta <= 1.0 / n + SUM_TOL:
        raise SimplexError(f"delta must lie in (0, 1/n], got {delta}")
    return Box((min(delta, 1.0 / n),) * n, (1.0,) * n)


@dataclass(frozen=True)
class VertexHull(ConvexSet):
    """Convex hull of finitely many simplex points."""

    vertices: tuple[tuple[float, ...], ...]
    _V: NDArray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.vertices) == 0:
            raise SimplexError("vertex hull needs at least one vertex")
        V = np.array([simplex_point(v) for v in self.vertices])
        object.__setattr__(self, "vertices", tuple(tuple(map(float, v)) for v in V))
        object.__setattr__(self, "_V", V)

    @property
    def n(self) -> int:
        return self._V.shape[1]

    @property
    def matrix(self) -> NDArray:
        return self._V

    def hull_coordinates(self, v: ArrayLike, tol: float = 1e-10, max_iter: int = 100_000) -> Vector:
        """Barycentric weights of the hull point nearest to ``v``.

        Projected gradient with Armijo backtracking on ``|V^T w - v|^2`` over the
        weight simplex; stops once the gradient-mapping norm drops below ``tol``
        or the objective has stopped moving for 20 steps.
        """
        v = np.asarray(v, dtype=float).ravel()
        V = self._V
        k = V.shape[0]
        if k == 1:
            return np.ones(1)
        w = np.full(k, 1.0 / k)
        step = 1.0 / max(2.0 * np.linalg.norm(V, 2) ** 2, 1e-12)
        r = V.T @ w - v
        fval = float(r @ r)
        stalled = 0
        for _ in range(max_iter):
            grad = 2.0 * V @ r
            t = step * 4.0
            while True:
                w_new = project(w - t * grad)
                r_new = V.T @ w_new - v
                f_new = float(r_new @ r_new)
                d = w_new - w
                if f_new <= fval + grad @ d + (d @ d) / (2 * t) + 1e-18 or t < 1e-16:
                    break
                t *= 0.5
            gm = np.linalg.norm(d) / t
            # near the optimum rounding noise can keep gm above tol forever
            stalled = stalled + 1 if abs(fval - f_new) <= 1e-16 * max(1.0, fval) else 0
            w, r, fval, step = w_new, r_new, f_new, t
            if gm < tol or stalled >= 20:
                break
        return w

    def project(self, v: ArrayLike) -> Vector:
        v = np.asarray(v, dtype=float).ravel()
        if v.size != self.n:
            raise SimplexError(f"dimension mismatch: {v.size} vs {self.n}")
        return self._V.T @ self.hull_coordinates(v)

    def min_coordinate(self) -> float:
        return float(self._V.min())


def distance_to_set(x: ArrayLike, Y: ConvexSet) -> float:
    """Distance from ``x`` to the convex set ``Y``."""
    return Y.distance(x)


def grid(n: int, h: float) -> NDArray:
    """Lattice points of the simplex with spacing at most ``h``.

    Rows are ordered lexicographically.  Every point of the simplex lies within
    ``sqrt(n) * h`` of some row.
    """
    if not h > 0:
        raise SimplexError(f"grid resolution must be positive, got {h}")
    if n < 2:
        raise SimplexError("grid needs n >= 2")
    N = math.ceil(1.0 / min(h, 1.0) - 1e-9)
    rows = []
    for cuts in itertools.combinations(range(N + n - 1), n - 1):
        parts = np.diff((-1,) + cuts + (N + n - 1,)) - 1
        rows.append(parts)
    pts = np.array(rows[::-1], dtype=float) / N
    order = np.lexsort(pts.T[::-1])
    return pts[order]


def grid_size(n: int, h: float) -> int:
    N = math.ceil(1.0 / min(h, 1.0) - 1e-9)
    return math.comb(N + n - 1, n - 1)
