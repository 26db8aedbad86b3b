"""Epsilon-consistent best responses and the set of inducible distributions.

For a cohort facing a conjectured distribution ``x`` of its observed
subpopulation, action ``b`` is admissible at level ``eps`` when some belief
makes ``b`` optimal and keeps the feedback discrepancy below ``eps``.  The
admissible sets pin down which cell distributions can be induced; membership
of a target ``x`` in that set is a convex least-squares problem.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linprog, nnls

from . import simplex as sx
from .divergence import ConvergenceError
from .game import (
    Bilinear,
    CellProfile,
    Cohort,
    CohortBeliefs,
    CohortGame,
    Message,
    Misspecified,
    Neighborhood,
    feedback_modulus,
    utility_modulus,
)

SLACK = 1e-9  # strict inequality f < eps decided as f <= eps - SLACK
OPT_TOL = 1e-9  # optimality residual accepted for a witness belief
TIE_TOL = 1e-10
_REGION_MARGIN = 1e-12

Vector = NDArray[np.float64]


# --------------------------------------------------------------------------- optimality


def best_response_actions(utility, beta, tol: float = TIE_TOL) -> list[int]:
    """All maximizers of ``a -> u(a, beta)``, ties within ``tol``."""
    if isinstance(utility, Cohort):
        utility = utility.utility
    vals = utility.values(np.asarray(beta, dtype=float))
    top = vals.max()
    return [a for a in range(len(vals)) if vals[a] >= top - tol]


def optimality_residual(utility, a: int, beta) -> float:
    """``max_b u(b, beta) - u(a, beta)``, zero when ``a`` is a best response."""
    vals = utility.values(np.asarray(beta, dtype=float))
    return float(max(vals.max() - vals[a], 0.0))


# --------------------------------------------------------------------------- polytope helpers


def _least_distance(C: NDArray, h: NDArray) -> Vector | None:
    """Shortest ``w`` with ``C w <= h`` (Lawson-Hanson via NNLS), ``None`` if infeasible."""
    E = np.vstack([-C.T, -h[None, :]])
    f = np.zeros(E.shape[0])
    f[-1] = 1.0
    u, _ = nnls(E, f, maxiter=50 * E.shape[1] + 100)
    r = E @ u - f
    if np.linalg.norm(r) < 1e-12 or r[-1] >= 0:
        return None
    return r[:-1] / (-r[-1])


def _region_constraints(table: tuple, b: int) -> tuple[NDArray, NDArray]:
    """``C beta <= d`` describing ``R_b`` inside the simplex."""
    V = np.array(table)
    n = V.shape[0]
    rows = [V[a] - V[b] for a in range(n) if a != b and np.any(V[a] != V[b])]
    C = np.vstack([*rows, -np.eye(n), np.ones((1, n)), -np.ones((1, n))]) if rows else np.vstack(
        [-np.eye(n), np.ones((1, n)), -np.ones((1, n))]
    )
    d = np.concatenate([np.full(len(rows), _REGION_MARGIN), np.zeros(n), [1.0], [-1.0]])
    return C, d


def _lp(c, table, b):
    V = np.array(table)
    n = V.shape[0]
    G = np.array([V[a] - V[b] for a in range(n) if a != b]) if n > 1 else np.zeros((0, n))
    res = linprog(
        c,
        A_ub=G if len(G) else None,
        b_ub=np.zeros(len(G)) if len(G) else None,
        A_eq=np.ones((1, n)),
        b_eq=[1.0],
        bounds=[(0, None)] * n,
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    return res


@functools.lru_cache(maxsize=4096)
def _region_info(table: tuple, b: int):
    """Emptiness of ``R_b`` and, for payoff feedback, the range of ``v_b . beta``
    over it with the two extreme witnesses."""
    V = np.array(table)
    res_lo = _lp(V[b], table, b)
    if res_lo.status == 2:
        return None
    if res_lo.status != 0:
        raise ConvergenceError(f"LP over best-response region of action {b} failed: {res_lo.message}")
    res_hi = _lp(-V[b], table, b)
    lo_pt = project_onto_region(table, b, res_lo.x)
    hi_pt = project_onto_region(table, b, res_hi.x)
    if lo_pt is None or hi_pt is None:
        return None
    return float(V[b] @ lo_pt), float(V[b] @ hi_pt), lo_pt, hi_pt


def region_nonempty(u: Bilinear, b: int) -> bool:
    return _region_info(u.table, b) is not None


def project_onto_region(table: tuple, b: int, z) -> Vector | None:
    """Nearest point of ``R_b`` to ``z`` (exact up to NNLS precision)."""
    z = np.asarray(z, dtype=float)
    C, d = _region_constraints(table, b)
    w = _least_distance(C, d - C @ z)
    if w is None:
        return None
    beta = np.clip(z + w, 0.0, None)
    beta /= beta.sum()
    return beta


# --------------------------------------------------------------------------- witnesses


@dataclass
class BRWitness:
    action: int
    belief: Vector
    residual: float
    optimality: float = 0.0

    def as_dict(self) -> dict:
        return {
            "action": self.action,
            "belief": np.asarray(self.belief).tolist(),
            "residual": self.residual,
            "optimality": self.optimality,
        }


@dataclass
class Admissible:
    """Outcome of the per-action belief search for one cohort and conjecture."""

    witnesses: dict[int, BRWitness | None]
    gaps: dict[int, float]
    certified: bool = True
    grid_gap: float | None = None

    @property
    def actions(self) -> list[int]:
        return sorted(a for a, w in self.witnesses.items() if w is not None)


def _witness(co: Cohort, b: int, beta: Vector, x: Vector) -> BRWitness:
    return BRWitness(b, beta, co.feedback_value(b, beta, x), optimality_residual(co.utility, b, beta))


def _target(co: Cohort, x: Vector) -> Vector | None:
    fb = co.feedback
    if isinstance(fb, Neighborhood) or (isinstance(fb, Message) and fb.name == "perfect"):
        return x
    if isinstance(fb, Misspecified):
        return co.best_fit(x)
    return None


def min_feedback(co: Cohort, b: int, x: Vector) -> BRWitness | None:
    """Belief in ``R_b`` minimizing ``f(b, ., x)``; ``None`` if ``b`` is never optimal.

    Exact convex paths for bilinear utilities with distance-type or payoff
    feedback; other combinations go through :func:`grid_min_feedback`.
    """
    u = co.utility
    if not isinstance(u, Bilinear):
        return grid_min_feedback(co, b, x)[0]
    info = _region_info(u.table, b)
    if info is None:
        return None
    z = _target(co, x)
    if z is not None:
        beta = project_onto_region(u.table, b, z)
        if beta is None:
            return None
        return _witness(co, b, beta, x)
    fb = co.feedback
    if isinstance(fb, Message) and fb.name == "payoff":
        lo, hi, lo_pt, hi_pt = info
        c = u.value(b, x)
        if c <= lo:
            beta = lo_pt
        elif c >= hi:
            beta = hi_pt
        else:
            theta = (c - lo) / (hi - lo)
            beta = (1 - theta) * lo_pt + theta * hi_pt
            beta = np.clip(beta, 0.0, None)
            beta /= beta.sum()
        return _witness(co, b, beta, x)
    return grid_min_feedback(co, b, x)[0]


def _belief_moduli(co: Cohort) -> float:
    lu = utility_modulus(co.utility).lipschitz
    fb = co.feedback
    if isinstance(fb, (Neighborhood, Misspecified)) or (isinstance(fb, Message) and fb.name == "perfect"):
        lf = 1.0
    else:
        lf = feedback_modulus(co).lipschitz
    return max(lu, lf, 1e-12)


def grid_min_feedback(co: Cohort, b: int, x: Vector, h: float | None = None, max_points: int = 20000):
    """Grid search plus local refinement over beliefs making ``b`` optimal.

    Returns ``(witness or None, grid_gap)`` where ``grid_gap`` bounds how far a
    better belief could hide from the grid.
    """
    n = co.n
    L = _belief_moduli(co)
    if h is None:
        h = 0.05
    while sx.grid_size(n, h) > max_points:
        h *= 1.25
    pts = sx.grid(n, h)
    bilinear = isinstance(co.utility, Bilinear)
    best, best_val = None, math.inf
    for z in pts:
        if optimality_residual(co.utility, b, z) > OPT_TOL:
            continue
        v = co.feedback_value(b, z, x)
        if v < best_val:
            best, best_val = z.copy(), v
    if bilinear:
        # lower-dimensional regions can slip between grid points
        for z in (x, *np.eye(n), sx.barycenter(n)):
            p = project_onto_region(co.utility.table, b, z)
            if p is not None:
                v = co.feedback_value(b, p, x)
                if v < best_val:
                    best, best_val = p, v
    if best is None:
        return None, math.sqrt(n) * h * L
    step = h
    while step > 1e-9:
        improved = False
        for i in range(n):
            for k in range(n):
                if i == k:
                    continue
                z = best.copy()
                move = min(step, z[k])
                if move <= 0:
                    continue
                z[i] += move
                z[k] -= move
                if bilinear:
                    z = project_onto_region(co.utility.table, b, z)
                    if z is None:
                        continue
                elif optimality_residual(co.utility, b, z) > OPT_TOL:
                    continue
                v = co.feedback_value(b, z, x)
                if v < best_val - 1e-15:
                    best, best_val, improved = z, v, True
        if not improved:
            step /= 2
    return _witness(co, b, best, x), math.sqrt(n) * h * L


def uses_exact_path(co: Cohort) -> bool:
    fb = co.feedback
    return isinstance(co.utility, Bilinear) and (
        isinstance(fb, (Neighborhood, Misspecified)) or (isinstance(fb, Message) and fb.name in ("perfect", "payoff"))
    )


def epsilon_consistent_br(co: Cohort, x, eps: float) -> Admissible:
    """Actions ``b`` with a belief in ``R_b`` whose feedback stays below ``eps``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x = np.asarray(x, dtype=float)
    exact = uses_exact_path(co)
    witnesses, gaps, grid_gap = {}, {}, None
    for b in range(co.n):
        if exact:
            w = min_feedback(co, b, x)
        else:
            L = _belief_moduli(co)
            w, grid_gap = grid_min_feedback(co, b, x, h=min(0.05, eps / (4 * L)))
        gaps[b] = math.inf if w is None else w.residual
        witnesses[b] = w if w is not None and w.residual <= eps - SLACK and w.optimality <= OPT_TOL else None
    return Admissible(witnesses, gaps, certified=exact, grid_gap=grid_gap)


def admissible_sets(game: CohortGame, x: NDArray, eps: float) -> list[Admissible]:
    """Admissible actions of every cohort against its observed component of ``x``."""
    return [epsilon_consistent_br(co, x[co.observes], eps) for co in game.cohorts]


# --------------------------------------------------------------------------- membership


@dataclass
class Membership:
    member: bool
    distance: float
    nearest: NDArray
    profile: CellProfile | None
    beliefs: CohortBeliefs | None
    admissible: list[Admissible]
    margin: float = math.inf
    infeasible_cohorts: list[int] = field(default_factory=list)

    @property
    def residual(self) -> float:
        """Largest feedback residual among the witnesses of played actions."""
        return self.margin


def _blocks(game: CohortGame):
    """Free distributions of the membership problem and their weight on each
    subpopulation: one per positive cell for partitions, one per cohort for
    overlapping covers."""
    w = game.cell_weights()
    blocks = []
    for c in range(game.size):
        if game.partition:
            for j in range(game.m):
                if game.cohorts[c].cells[j] > 0:
                    weight = np.zeros(game.m)
                    weight[j] = w[c, j]
                    blocks.append((c, (j,), weight))
        else:
            js = tuple(j for j in range(game.m) if game.cohorts[c].cells[j] > 0)
            blocks.append((c, js, w[c].copy()))
    return blocks


def nearest_inducible(game: CohortGame, x: NDArray, supports: list[list[int]], iters: int = 400):
    """Cell profile supported on ``supports`` whose induced distributions are
    closest to ``x`` in summed squared distance."""
    n, m = game.n, game.m
    blocks = _blocks(game)
    k = len(blocks)
    mask = np.zeros((k, n), dtype=bool)
    for i, (c, _, _) in enumerate(blocks):
        mask[i, supports[c]] = True
    # least squares with the unit-sum rows weighted heavily, then a projected
    # gradient polish on the exact product of faces
    omega = 1e4
    cols = [(i, a) for i in range(k) for a in range(n) if mask[i, a]]
    A = np.zeros((m * n + k, len(cols)))
    rhs = np.concatenate([np.asarray(x, dtype=float).ravel(), np.full(k, omega)])
    for col, (i, a) in enumerate(cols):
        weight = blocks[i][2]
        for j in range(m):
            A[j * n + a, col] = weight[j]
        A[m * n + i, col] = omega
    sol, _ = nnls(A, rhs, maxiter=50 * len(cols) + 200)
    Y = np.zeros((k, n))
    for col, (i, a) in enumerate(cols):
        Y[i, a] = sol[col]
    Y = np.where(mask, Y, 0.0)
    sums = Y.sum(axis=1, keepdims=True)
    Y = np.where(sums > 0, Y / np.where(sums > 0, sums, 1.0), mask / mask.sum(axis=1, keepdims=True))
    W = np.array([blk[2] for blk in blocks])  # (k, m)
    X = np.asarray(x, dtype=float)

    def induced(Y):
        return W.T @ Y

    def obj(Y):
        r = induced(Y) - X
        return float(np.sum(r * r))

    lip = 2.0 * max(np.linalg.eigvalsh(W @ W.T).max(), 1e-12)
    Z, fz = Y, obj(Y)
    P, t_mom = Y, 1.0
    for _ in range(iters):
        g = 2.0 * W @ (induced(P) - X)
        Y_new = sx.project_rows_onto_faces(P - g / lip, mask)
        f_new = obj(Y_new)
        if f_new > fz:
            P, t_mom = Z, 1.0
            continue
        t_next = (1 + math.sqrt(1 + 4 * t_mom * t_mom)) / 2
        P = Y_new + ((t_mom - 1) / t_next) * (Y_new - Z)
        P = sx.project_rows_onto_faces(P, mask)
        if fz - f_new < 1e-20:
            Z, fz = Y_new, f_new
            break
        Z, fz, t_mom = Y_new, f_new, t_next
    Y = Z
    Y = np.where(Y < 1e-13, 0.0, Y)
    Y /= Y.sum(axis=1, keepdims=True)
    # zero-mass cells are ignored; fill them with the cohort's first block
    cube = np.zeros((game.size, m, n))
    first = {}
    for i, (c, js, _) in enumerate(blocks):
        first.setdefault(c, i)
        for j in js:
            cube[c, j] = Y[i]
    for c in range(game.size):
        for j in range(m):
            if game.cohorts[c].cells[j] == 0:
                cube[c, j] = Y[first[c]]
    profile = CellProfile(cube)
    near = game.induced(profile)
    return profile, near, float(np.sqrt(np.sum((near - X) ** 2)))


def inducible_membership(game: CohortGame, x, eps: float, tol: float | None = None, admissible=None) -> Membership:
    """Is ``x`` (one distribution per subpopulation) inducible by profiles whose
    played actions are eps-consistent best responses against ``x`` itself?"""
    x = np.asarray(x, dtype=float)
    if x.shape != (game.m, game.n):
        raise ValueError(f"target must have shape {(game.m, game.n)}, got {x.shape}")
    tol = eps / 10 if tol is None else tol
    adm = admissible if admissible is not None else admissible_sets(game, x, eps)
    empty = [c for c, s in enumerate(adm) if not s.actions]
    if empty:
        return Membership(False, math.inf, np.full_like(x, np.nan), None, None, adm, infeasible_cohorts=empty)
    supports = [s.actions for s in adm]
    profile, near, dist = nearest_inducible(game, x, supports)
    beliefs = CohortBeliefs(tuple({a: s.witnesses[a].belief for a in s.actions} for s in adm))
    margin = 0.0
    for c, s in enumerate(adm):
        for a in profile.played(game, c):
            margin = max(margin, s.witnesses[a].residual)
    return Membership(dist <= tol, dist, near, profile, beliefs, adm, margin)


def witness_holds(game: CohortGame, x, eps: float, tol: float, profile: CellProfile, beliefs: CohortBeliefs) -> bool:
    """Membership of ``x`` certified by a given profile and belief witness."""
    x = np.asarray(x, dtype=float)
    near = game.induced(profile)
    if np.sqrt(np.sum((near - x) ** 2)) > tol:
        return False
    for c, co in enumerate(game.cohorts):
        for a in profile.played(game, c):
            beta = beliefs.belief(c, a)
            if beta is None or optimality_residual(co.utility, a, beta) > OPT_TOL:
                return False
            if co.feedback_value(a, beta, x[co.observes]) > eps - SLACK:
                return False
    return True


def stability_radius(game: CohortGame, result: Membership, eps: float, tol: float, lipschitz: float) -> float:
    """Radius ``rho`` such that every ``x'`` with ``max_j d(x_j, x'_j) <= rho`` keeps
    the same witness: ``2 L rho < eps - r`` and the induced point stays within ``tol``."""
    room_f = (eps - SLACK - result.margin) / (2 * lipschitz)
    room_d = (tol - result.distance) / (2 * math.sqrt(game.m))
    return max(0.0, min(room_f, room_d))


# --------------------------------------------------------------------------- discretized convexity


def midpoint_selection_error(n: int, m: int, N: int, first: NDArray, second: NDArray) -> float:
    """Largest distance between the midpoint of two selection-induced vectors
    and the vector induced by a third selection.

    ``N`` equal atoms are split into ``m`` consecutive cover elements; ``first``
    and ``second`` give each atom's action.  The third selection gives each atom
    one of its two actions: every group of atoms sharing a pair ``(a, b)`` is
    split in half, and the odd atom of each group is assigned greedily to keep
    the error small.
    """
    first = np.asarray(first)
    second = np.asarray(second)
    if N % m:
        raise ValueError("N must be divisible by m")
    size = N // m
    worst = 0.0
    for j in range(m):
        sl = slice(j * size, (j + 1) * size)
        f, g = first[sl], second[sl]
        target = (np.bincount(f, minlength=n) + np.bincount(g, minlength=n)) / (2 * size)
        counts = np.zeros(n)
        err = np.zeros(n)
        for a in range(n):
            for b in range(n):
                k = int(np.sum((f == a) & (g == b)))
                if k == 0:
                    continue
                counts[a] += k // 2
                counts[b] += k // 2
                if k % 2:
                    # pick the side that keeps the running error shortest
                    plus = err.copy()
                    plus[a] += 1
                    minus = err.copy()
                    minus[b] += 1
                    if a == b or np.linalg.norm(plus - 0.5 * (np.eye(n)[a] + np.eye(n)[b])) <= np.linalg.norm(
                        minus - 0.5 * (np.eye(n)[a] + np.eye(n)[b])
                    ):
                        counts[a] += 1
                        err = plus - 0.5 * (np.eye(n)[a] + np.eye(n)[b])
                    else:
                        counts[b] += 1
                        err = minus - 0.5 * (np.eye(n)[a] + np.eye(n)[b])
        worst = max(worst, float(np.linalg.norm(counts / size - target)))
    return worst
