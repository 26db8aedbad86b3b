"""Nonatomic games with estimation feedback: the finite-cohort representation.

The player space is split into finitely many cohorts of identical players.
Each cohort meets the cover elements (subpopulations) in cells of known mass;
a strategy profile is given at cell granularity by the action distribution
inside each cell.  Because the population measure is strongly continuous any
such distribution is realized by some pure profile, so the cell matrix carries
everything the equilibrium conditions need.

Actions, cohorts and cover elements are indexed from 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import simplex as sx
from .divergence import Divergence, ModelSet, argmin_over_model_set
from .exact import to_fraction

Vector = NDArray[np.float64]


class GameError(ValueError):
    pass


# --------------------------------------------------------------------------- utilities


class Utility:
    n: int

    def values(self, beta: Vector) -> Vector:
        """Payoff of every action against belief ``beta``."""
        raise NotImplementedError

    def value(self, a: int, beta: Vector) -> float:
        if not 0 <= a < self.n:
            raise GameError(f"action {a} out of range for {self.n} actions")
        return float(self.values(beta)[a])

    @property
    def is_bilinear(self) -> bool:
        return False


@dataclass(frozen=True)
class Bilinear(Utility):
    """Expected-utility payoffs ``u(a, x) = sum_b v(a, b) x_b`` with ``v`` in [0, 1]."""

    table: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        v = np.array(self.table, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 2:
            raise GameError(f"payoff table must be square with n >= 2, got shape {v.shape}")
        if not np.all(np.isfinite(v)) or v.min() < 0 or v.max() > 1:
            raise GameError("payoff table entries must lie in [0, 1]")
        object.__setattr__(self, "table", tuple(tuple(map(float, row)) for row in v))

    @classmethod
    def normalized(cls, table: ArrayLike) -> "Bilinear":
        """Affinely rescale an arbitrary table into [0, 1] (preferences unchanged)."""
        v = np.asarray(table, dtype=float)
        lo, hi = v.min(), v.max()
        return cls(tuple(map(tuple, (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v))))

    @property
    def n(self) -> int:
        return len(self.table)

    @property
    def matrix(self) -> NDArray:
        return np.array(self.table)

    def values(self, beta: Vector) -> Vector:
        return self.matrix @ np.asarray(beta, dtype=float)

    @property
    def is_bilinear(self) -> bool:
        return True


@dataclass(frozen=True)
class ContinuousUtility(Utility):
    """Payoffs given by a callable ``beta -> payoff vector``.

    ``lipschitz`` is the declared modulus in the belief (Euclidean metric);
    leave it ``None`` to have it estimated by sampling.
    """

    fn: Callable[[Vector], ArrayLike]
    n_actions: int
    lipschitz: float | None = None

    @property
    def n(self) -> int:
        return self.n_actions

    def values(self, beta: Vector) -> Vector:
        out = np.asarray(self.fn(np.asarray(beta, dtype=float)), dtype=float)
        if out.shape != (self.n,) or not np.all(np.isfinite(out)):
            raise GameError("utility callable must return a finite vector of payoffs")
        return out


class _LatticeInterpolant:
    """Piecewise-linear interpolation of lattice samples over the simplex
    (Freudenthal triangulation in cumulative coordinates)."""

    def __init__(self, points: ArrayLike, payoffs: ArrayLike):
        pts = np.asarray(points, dtype=float)
        vals = np.asarray(payoffs, dtype=float)
        if pts.ndim != 2 or vals.shape[0] != pts.shape[0]:
            raise GameError("tabulated utility needs one payoff row per sample point")
        n = pts.shape[1]
        k = round(1.0 / min(d for d in np.abs(np.diff(np.unique(pts[:, 0])))) if len(np.unique(pts[:, 0])) > 1 else 0)
        if k < 1 or len(pts) != sx.grid_size(n, 1.0 / k):
            raise GameError(f"tabulated utility samples must be the full simplex lattice, got {len(pts)} points")
        table = {}
        for p, v in zip(pts, vals):
            counts = np.rint(p * k).astype(int)
            if counts.sum() != k or np.max(np.abs(p * k - counts)) > 1e-9:
                raise GameError(f"sample point {p.tolist()} is not on the lattice of step 1/{k}")
            table[tuple(counts)] = v
        if len(table) != len(pts):
            raise GameError("tabulated utility lists a sample point twice")
        self.n, self.k, self.table = n, k, table

    def _value(self, cum: NDArray) -> Vector:
        counts = np.append(self.k - cum[0], -np.diff(np.append(cum, 0)))
        return self.table[tuple(int(c) for c in counts)]

    def __call__(self, beta: Vector) -> Vector:
        # cumulative coordinates c_i = k * (beta_i + ... + beta_{n-1}) are nonincreasing in i
        c = self.k * np.cumsum(np.asarray(beta, dtype=float)[::-1])[::-1][1:]
        c = np.clip(c, 0.0, self.k)
        base = np.minimum(np.floor(c), self.k - 1)
        frac = c - base
        order = np.argsort(-frac, kind="stable")
        v = base.astype(int)
        out = (1.0 - frac[order[0]]) * self._value(v)
        for r, i in enumerate(order):
            v = v.copy()
            v[i] += 1
            nxt = frac[order[r + 1]] if r + 1 < len(order) else 0.0
            w = frac[i] - nxt
            if w > 0:
                out = out + w * self._value(v)
        return out


def tabulated_utility(points: ArrayLike, payoffs: ArrayLike, lipschitz: float | None = None) -> ContinuousUtility:
    """Continuous utility from payoff samples on the full simplex lattice of
    some step ``1/k``, interpolated linearly between lattice points."""
    interp = _LatticeInterpolant(points, payoffs)
    return ContinuousUtility(interp, interp.n, lipschitz)


def constant_utility(n: int) -> Bilinear:
    return Bilinear(tuple((0.0,) * n for _ in range(n)))


# --------------------------------------------------------------------------- feedback


class Feedback:
    kind: str = ""
    # x = y  =>  f(a, x, y) = 0
    strongly_grounded: bool = True


@dataclass(frozen=True)
class Neighborhood(Feedback):
    """Belief is compared with the observed subpopulation in the simplex metric."""

    kind = "neighborhood"


@dataclass(frozen=True)
class Message(Feedback):
    """Feedback ``|m(a, beta) - m(a, x)|`` from a message map into R^k.

    ``name`` is ``"perfect"`` (``m(a, x) = x``), ``"payoff"`` (``m = u``) or
    ``"custom"`` with an explicit ``fn(a, x)``.
    """

    name: str = "perfect"
    fn: Callable[[int, Vector], ArrayLike] | None = None
    lipschitz: float | None = None
    kind = "message"

    def __post_init__(self):
        if self.name not in ("perfect", "payoff", "custom"):
            raise GameError(f"unknown message map {self.name!r}")
        if self.name == "custom" and self.fn is None:
            raise GameError("custom message map needs a callable")

    def message(self, utility: Utility, a: int, x: Vector) -> Vector:
        if self.name == "perfect":
            return np.asarray(x, dtype=float)
        if self.name == "payoff":
            return np.array([utility.value(a, x)])
        return np.atleast_1d(np.asarray(self.fn(a, np.asarray(x, dtype=float)), dtype=float))


def perfect_feedback() -> Message:
    return Message("perfect")


def payoff_feedback() -> Message:
    return Message("payoff")


@dataclass(frozen=True)
class Misspecified(Feedback):
    """Distance from the belief to the best fit of the observed distribution in
    the cohort's model set."""

    divergence: Divergence = None
    kind = "misspecified"
    strongly_grounded = False


@dataclass(frozen=True)
class CustomFeedback(Feedback):
    fn: Callable[[int, Vector, Vector], float] = None
    lipschitz: float | None = None
    convex_in_belief: bool = False
    kind = "custom"
    strongly_grounded = False


# --------------------------------------------------------------------------- cohorts and games


@dataclass(frozen=True, eq=False)
class Cohort:
    mass: Fraction
    cells: tuple[Fraction, ...]
    observes: int
    utility: Utility
    feedback: Feedback
    model_set: ModelSet | None = None
    name: str = ""
    _fit_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mass", to_fraction(self.mass))
        object.__setattr__(self, "cells", tuple(to_fraction(c) for c in self.cells))
        if not 0 < self.mass <= 1:
            raise GameError(f"cohort mass must lie in (0, 1], got {self.mass}")
        if any(c < 0 or c > self.mass for c in self.cells):
            raise GameError("cell masses must lie in [0, cohort mass]")
        if isinstance(self.feedback, Misspecified):
            if self.model_set is None:
                raise GameError("misspecified feedback needs a model set")
            if self.model_set.n != self.utility.n:
                raise GameError("model set dimension does not match the action count")

    @property
    def n(self) -> int:
        return self.utility.n

    def best_fit(self, x: Vector) -> Vector:
        """Best fit of ``x`` in the model set (misspecified feedback only)."""
        key = np.asarray(x, dtype=float).tobytes()
        hit = self._fit_cache.get(key)
        if hit is None:
            hit = argmin_over_model_set(self.feedback.divergence, x, self.model_set).point
            if len(self._fit_cache) > 4096:
                self._fit_cache.clear()
            self._fit_cache[key] = hit
        return hit

    def feedback_value(self, a: int, beta: ArrayLike, x: ArrayLike) -> float:
        """``f(a, beta, x)`` for this cohort."""
        beta = np.asarray(beta, dtype=float)
        x = np.asarray(x, dtype=float)
        if not 0 <= a < self.n:
            raise GameError(f"action {a} out of range for {self.n} actions")
        fb = self.feedback
        if isinstance(fb, Neighborhood):
            return sx.distance(beta, x)
        if isinstance(fb, Message):
            return float(np.linalg.norm(fb.message(self.utility, a, beta) - fb.message(self.utility, a, x)))
        if isinstance(fb, Misspecified):
            return sx.distance(beta, self.best_fit(x))
        if isinstance(fb, CustomFeedback):
            val = float(fb.fn(a, beta, x))
            if not val >= 0:
                raise GameError(f"custom feedback returned {val!r}")
            return val
        raise GameError(f"unsupported feedback {fb!r}")

    def grounding_belief(self, y: Vector) -> Vector | None:
        """A belief with zero feedback against ``y`` for every action, when one
        is available in closed form."""
        if self.feedback.strongly_grounded:
            return np.asarray(y, dtype=float)
        if isinstance(self.feedback, Misspecified):
            return self.best_fit(y)
        return None


@dataclass(frozen=True, eq=False)
class CohortGame:
    """Finite-cohort game; ``cover`` lists the masses of the subpopulations."""

    n: int
    cohorts: tuple[Cohort, ...]
    cover: tuple[Fraction, ...]
    partition: bool = True
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "cohorts", tuple(self.cohorts))
        object.__setattr__(self, "cover", tuple(to_fraction(c) for c in self.cover))
        if self.n < 2:
            raise GameError("a game needs at least two actions")
        if not self.cohorts:
            raise GameError("a game needs at least one cohort")
        m = len(self.cover)
        if m < 1 or any(c <= 0 for c in self.cover):
            raise GameError("every cover element needs strictly positive mass")
        if sum(c.mass for c in self.cohorts) != 1:
            raise GameError(f"cohort masses sum to {sum(c.mass for c in self.cohorts)}, not 1")
        for i, c in enumerate(self.cohorts):
            if len(c.cells) != m:
                raise GameError(f"cohort {i} lists {len(c.cells)} cells for {m} cover elements")
            if c.n != self.n:
                raise GameError(f"cohort {i} utility has {c.n} actions, game has {self.n}")
            if not 0 <= c.observes < m:
                raise GameError(f"cohort {i} observes unknown cover element {c.observes}")
            total = sum(c.cells)
            if self.partition and total != c.mass:
                raise GameError(f"cohort {i}: cells sum to {total}, partition requires {c.mass}")
            if total < c.mass:
                raise GameError(f"cohort {i}: cells sum to {total} < cohort mass, cover misses players")
        for j in range(m):
            got = sum(c.cells[j] for c in self.cohorts)
            if got != self.cover[j]:
                raise GameError(f"cover element {j}: declared mass {self.cover[j]}, cells add to {got}")

    @property
    def m(self) -> int:
        return len(self.cover)

    @property
    def size(self) -> int:
        return len(self.cohorts)

    def cell_mass(self) -> NDArray:
        return np.array([[float(c) for c in co.cells] for co in self.cohorts])

    def cell_weights(self) -> NDArray:
        """``mu[c, j] / lambda(T_j)``: share of subpopulation ``j`` in cohort ``c``."""
        return np.array([[float(co.cells[j] / self.cover[j]) for j in range(self.m)] for co in self.cohorts])

    def induced(self, profile: "CellProfile") -> NDArray:
        """Action distribution in every subpopulation, shape ``(m, n)``."""
        y = profile.y
        if y.shape != (self.size, self.m, self.n):
            raise GameError(f"profile shape {y.shape} does not fit game {(self.size, self.m, self.n)}")
        w = self.cell_weights()
        return np.einsum("cj,cja->ja", w, y)

    def observed(self, x: NDArray, c: int) -> Vector:
        return np.asarray(x[self.cohorts[c].observes])

    def utility(self, c: int, a: int, beta: ArrayLike) -> float:
        return self.cohorts[c].utility.value(a, np.asarray(beta, dtype=float))

    def feedback(self, c: int, a: int, beta: ArrayLike, x: ArrayLike) -> float:
        return self.cohorts[c].feedback_value(a, beta, x)

    def observed_components(self) -> list[int]:
        return sorted({co.observes for co in self.cohorts})

    def with_feedback(self, feedback: Feedback) -> "CohortGame":
        """Same game, every cohort switched to ``feedback``."""
        cohorts = tuple(
            Cohort(co.mass, co.cells, co.observes, co.utility, feedback, co.model_set, co.name)
            for co in self.cohorts
        )
        return CohortGame(self.n, cohorts, self.cover, self.partition, self.name)


def single_cohort_game(utility: Utility, feedback: Feedback, model_set: ModelSet | None = None) -> CohortGame:
    co = Cohort(Fraction(1), (Fraction(1),), 0, utility, feedback, model_set)
    return CohortGame(utility.n, (co,), (Fraction(1),))


# --------------------------------------------------------------------------- profiles and beliefs


@dataclass(frozen=True, eq=False)
class CellProfile:
    """Action distribution inside every (cohort, cover element) cell.

    Entries of zero-mass cells are ignored.  For covers that are not
    partitions, all cells of a cohort must carry the same distribution, since
    overlapping players cannot split two ways at once.
    """

    y: NDArray

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        if y.ndim != 3:
            raise GameError("cell profile must have shape (cohorts, cover, actions)")
        y.flags.writeable = False
        object.__setattr__(self, "y", y)

    @classmethod
    def uniform_rows(cls, game: CohortGame, rows: Sequence[ArrayLike]) -> "CellProfile":
        """One distribution per cohort, repeated in each of its cells."""
        y = np.array([[sx.simplex_point(r)] * game.m for r in rows])
        return cls(y)

    def validate(self, game: CohortGame) -> None:
        if self.y.shape != (game.size, game.m, game.n):
            raise GameError(f"profile shape {self.y.shape} does not fit game {(game.size, game.m, game.n)}")
        mass = game.cell_mass()
        for c in range(game.size):
            rows = [j for j in range(game.m) if mass[c, j] > 0]
            for j in rows:
                try:
                    sx.simplex_point(self.y[c, j])
                except sx.SimplexError as exc:
                    raise GameError(f"cell ({c}, {j}): {exc}") from None
            if not game.partition and rows:
                ref = self.y[c, rows[0]]
                if any(np.max(np.abs(self.y[c, j] - ref)) > 1e-12 for j in rows):
                    raise GameError(f"cohort {c}: overlapping cover requires one distribution per cohort")

    def played(self, game: CohortGame, c: int, threshold: float = 0.0) -> list[int]:
        """Actions with positive weight in some positive-mass cell of cohort ``c``."""
        mass = game.cell_mass()[c]
        w = self.y[c][mass > 0]
        return [a for a in range(game.n) if np.any(w[:, a] > threshold)]


@dataclass(frozen=True, eq=False)
class CohortBeliefs:
    """Witness beliefs: per cohort, a map from played action to belief."""

    beliefs: tuple[dict[int, Vector], ...]

    @classmethod
    def shared(cls, game: CohortGame, per_cohort: Sequence[ArrayLike]) -> "CohortBeliefs":
        return cls(tuple({a: sx.simplex_point(b) for a in range(game.n)} for b in per_cohort))

    def belief(self, c: int, a: int) -> Vector | None:
        if c >= len(self.beliefs):
            return None
        return self.beliefs[c].get(a)


# --------------------------------------------------------------------------- grounding


@dataclass
class GroundingReport:
    passed: bool
    samples: int
    violations: list[dict]
    method: dict[int, str]


def _search_grounding(co: Cohort, y: Vector, rng: np.random.Generator) -> tuple[Vector, float]:
    def worst(z):
        return max(co.feedback_value(a, z, y) for a in range(co.n))

    best, best_val = np.asarray(y), worst(y)
    if best_val <= 1e-8:
        return best, best_val
    for z in sx.grid(co.n, 0.1 if co.n <= 4 else 0.25):
        v = worst(z)
        if v < best_val:
            best, best_val = z, v
    step = 0.05
    while step > 1e-10 and best_val > 1e-8:
        improved = False
        for i in range(co.n):
            for k in range(co.n):
                if i == k:
                    continue
                z = best.copy()
                move = min(step, z[k])
                z[i] += move
                z[k] -= move
                v = worst(z)
                if v < best_val:
                    best, best_val, improved = z, v, True
        if not improved:
            step /= 2
    return best, best_val


def check_grounding(game, samples: int = 50, seed: int = 0) -> GroundingReport:
    """Exhibit, for random true distributions ``y``, a belief with zero feedback
    under every action, or report the failing ``y``."""
    rng = np.random.default_rng(seed)
    if not isinstance(game, CohortGame):
        # built-in tail families use message feedback, grounded by construction
        return GroundingReport(True, 0, [], {0: "message"})
    violations, method = [], {}
    for c, co in enumerate(game.cohorts):
        if isinstance(co.feedback, (Neighborhood, Message)):
            method[c] = "x_y = y"
        elif isinstance(co.feedback, Misspecified):
            method[c] = "x_y = best fit"
        else:
            method[c] = "search"
        for _ in range(samples):
            y = rng.dirichlet(np.ones(game.n))
            if method[c] == "search":
                z, val = _search_grounding(co, y, rng)
            else:
                z = co.grounding_belief(y)
                val = max(co.feedback_value(a, z, y) for a in range(game.n))
            if val > 1e-8:
                violations.append({"cohort": c, "y": y.tolist(), "best_belief": np.asarray(z).tolist(), "residual": val})
                break
    return GroundingReport(not violations, samples, violations, method)


# --------------------------------------------------------------------------- equicontinuity


@dataclass(frozen=True)
class Modulus:
    """Lipschitz modulus: ``|g(x) - g(y)| <= lipschitz * d(x, y)``."""

    lipschitz: float
    certified: bool
    source: str

    def delta(self, eps: float) -> float:
        """A radius below which values move by less than ``eps``."""
        if self.lipschitz == 0:
            return math.inf
        return eps / self.lipschitz


@dataclass
class CohortModuli:
    utility: Modulus
    feedback: Modulus


def _sampled_modulus(fn, n: int, rng, samples: int = 200, what: str = "") -> Modulus:
    worst = 0.0
    for _ in range(samples):
        x = rng.dirichlet(np.ones(n))
        direction = rng.normal(size=n)
        direction -= direction.mean()
        direction /= np.linalg.norm(direction)
        y = sx.project(x + rng.uniform(1e-4, 0.05) * direction)
        d = sx.distance(x, y)
        if d == 0:
            continue
        worst = max(worst, fn(x, y) / d)
    return Modulus(worst, False, f"sampled ({what})")


def utility_modulus(u: Utility, rng=None) -> Modulus:
    if isinstance(u, Bilinear):
        return Modulus(math.sqrt(u.n), True, "bilinear: sqrt(n) by Cauchy-Schwarz")
    if isinstance(u, ContinuousUtility) and u.lipschitz is not None:
        return Modulus(float(u.lipschitz), True, "declared")
    rng = rng or np.random.default_rng(0)
    return _sampled_modulus(lambda x, y: float(np.max(np.abs(u.values(x) - u.values(y)))), u.n, rng, what="utility")


def feedback_modulus(co: Cohort, rng=None) -> Modulus:
    fb = co.feedback
    rng = rng or np.random.default_rng(0)
    if isinstance(fb, Neighborhood):
        return Modulus(1.0, True, "neighborhood: reverse triangle inequality")
    if isinstance(fb, Message):
        if fb.name == "perfect":
            return Modulus(1.0, True, "perfect message: reverse triangle inequality")
        if fb.name == "payoff":
            um = utility_modulus(co.utility, rng)
            return Modulus(um.lipschitz, um.certified, "payoff message: utility modulus")
        if fb.lipschitz is not None:
            return Modulus(float(fb.lipschitz), True, "declared message modulus")
    if isinstance(fb, CustomFeedback) and fb.lipschitz is not None:
        return Modulus(float(fb.lipschitz), True, "declared")

    def ratio(x, y):
        gamma = rng.dirichlet(np.ones(co.n))
        return max(abs(co.feedback_value(a, gamma, x) - co.feedback_value(a, gamma, y)) for a in range(co.n))

    return _sampled_modulus(ratio, co.n, rng, samples=100, what="feedback")


def equicontinuity_bound(game, seed: int = 0) -> list[CohortModuli]:
    """Per-cohort moduli of the utility (in the belief) and of the feedback (in
    the true distribution)."""
    if not isinstance(game, CohortGame):
        return game.moduli()
    rng = np.random.default_rng(seed)
    return [CohortModuli(utility_modulus(co.utility, rng), feedback_modulus(co, rng)) for co in game.cohorts]
