"""Search for eps-estimated equilibria of cohort games.

A conjecture ``x`` (one distribution per subpopulation) is a fixed point when
``x`` is itself inducible by eps-consistent best responses against ``x``.
The search runs in three stages, each from several starts:

1. damped best-response iteration ``x <- x + eta * (nearest inducible - x)``,
   halving ``eta`` whenever the distance stalls;
2. a logit homotopy: cohorts weight actions by ``exp(-lam * gap)`` where
   ``gap`` is the least feedback discrepancy compatible with optimality; fixed
   points of this smooth map are followed by least squares as ``lam`` grows
   until inadmissible actions carry no weight;
3. a grid sweep over the observed subpopulations (when small enough) that
   restarts stage 1 from the best grid points.

Whatever the stage, the answer is re-verified from scratch before it is
returned.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import least_squares

from . import simplex as sx
from .bestresponse import SLACK, epsilon_consistent_br, inducible_membership
from .divergence import CapabilityError
from .equilibrium import CohortResult, EquilibriumReport, verify_estimated, verify_nash
from .game import (
    Bilinear,
    CellProfile,
    CohortBeliefs,
    CohortGame,
    CustomFeedback,
    Misspecified,
    check_grounding,
    equicontinuity_bound,
    perfect_feedback,
)

THREADS_ENV = "NONATOMIC_EQ_THREADS"


class NotFoundError(RuntimeError):
    def __init__(self, message: str, best_residual: float):
        super().__init__(message)
        self.best_residual = best_residual


class PreconditionError(ValueError):
    pass


@dataclass
class SolveResult:
    profile: CellProfile
    beliefs: CohortBeliefs
    target: NDArray
    fixed_point_residual: float
    iterations: int
    wall_time: float
    verified: EquilibriumReport
    method: str
    restart: int
    level: float
    certified: bool
    nash: EquilibriumReport | None = None

    def as_dict(self) -> dict:
        # wall time is left out so reports stay byte-identical across runs
        out = {
            "profile": self.profile.y.tolist(),
            "beliefs": self.verified.witnesses,
            "target": np.asarray(self.target).tolist(),
            "fixedPointResidual": self.fixed_point_residual,
            "iterations": self.iterations,
            "method": self.method,
            "restart": self.restart,
            "searchLevel": self.level,
            "certifiedModulus": self.certified,
            "verified": self.verified.as_dict(),
        }
        if self.nash is not None:
            out["nash"] = self.nash.as_dict()
        return out


@dataclass
class _Attempt:
    result: SolveResult | None
    best: float
    iterations: int


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def feedback_lipschitz(game: CohortGame) -> tuple[float, bool]:
    """Largest feedback modulus in the true distribution; uncertified
    estimates are doubled."""
    worst, certified = 0.0, True
    for mod in equicontinuity_bound(game):
        lip = mod.feedback.lipschitz
        if not mod.feedback.certified:
            lip *= 2.0
            certified = False
        worst = max(worst, lip)
    return max(worst, 1e-12), certified


def _starts(game: CohortGame, restarts: int, seed: int) -> list[NDArray]:
    n, m = game.n, game.m
    starts = [np.tile(sx.barycenter(n), (m, 1))]
    for a in range(n):
        starts.append(np.tile(sx.vertex(n, a), (m, 1)))
    rng = np.random.default_rng(seed)
    while len(starts) < restarts:
        starts.append(rng.dirichlet(np.ones(n), size=m))
    return starts[:restarts]


class _Search:
    def __init__(self, game: CohortGame, eps: float, level: float, tol: float, lipschitz: float, certified: bool,
                 damping: float, max_iter: int, grid_step: float, grid_budget: int):
        self.game = game
        self.eps = eps
        self.level = level
        self.tol = tol
        self.lipschitz = lipschitz
        self.certified = certified
        self.damping = damping
        self.max_iter = max_iter
        self.grid_step = grid_step
        self.grid_budget = grid_budget
        self.observed = game.observed_components()

    # -- assembly and independent verification

    def _finish(self, profile, beliefs, x, iterations, method, restart, t0) -> SolveResult | None:
        profile = _clean(profile, self.game)
        rep = verify_estimated(self.game, profile, beliefs, self.eps)
        if not rep.passed:
            return None
        induced = self.game.induced(profile)
        resid = float(np.max(np.linalg.norm(induced - x, axis=1)))
        return SolveResult(profile, beliefs, np.asarray(x), resid, iterations, time.perf_counter() - t0, rep,
                           method, restart, self.level, self.certified)

    # -- stage 1

    def damped(self, x: NDArray, restart: int, t0: float) -> _Attempt:
        eta, best, stall = self.damping, math.inf, 0
        it = 0
        for it in range(1, self.max_iter + 1):
            mem = inducible_membership(self.game, x, self.level, self.tol)
            if mem.infeasible_cohorts:
                raise PreconditionError(f"no admissible action for cohorts {mem.infeasible_cohorts}")
            if mem.member:
                res = self._finish(mem.profile, mem.beliefs, x, it, "damped", restart, t0)
                if res is not None:
                    return _Attempt(res, 0.0, it)
            if mem.distance < best - 1e-12:
                best, stall = mem.distance, 0
            else:
                stall += 1
                if stall >= 3:
                    eta, stall = eta / 2, 0
                    if eta < 1e-3:
                        break
            x = x + eta * (mem.nearest - x)
        return _Attempt(None, best, it)

    # -- stage 2

    def _gaps(self, x: NDArray) -> NDArray:
        G = np.full((self.game.size, self.game.n), np.inf)
        for c, co in enumerate(self.game.cohorts):
            adm = epsilon_consistent_br(co, x[co.observes], self.level)
            for a, gap in adm.gaps.items():
                G[c, a] = gap
        return G

    def logit(self, x: NDArray, lam: float) -> NDArray:
        """Smoothed response: each cohort weights action ``a`` by
        ``exp(-lam * gap_a)``, where ``gap_a`` is the least feedback
        discrepancy of a belief making ``a`` optimal."""
        G = self._gaps(x)
        z = -lam * (G - G.min(axis=1, keepdims=True))
        w = np.exp(z)
        w /= w.sum(axis=1, keepdims=True)
        return self.game.induced(CellProfile(np.repeat(w[:, None, :], self.game.m, axis=1)))

    def _residual(self, v: NDArray, lam: float) -> NDArray:
        V = v.reshape(self.game.m, self.game.n)
        X = np.array([sx.project(row) for row in V])
        return np.concatenate([(X - self.logit(X, lam)).ravel(), (V - X).ravel()])

    def homotopy(self, x: NDArray, restart: int, t0: float) -> _Attempt:
        """Follow fixed points of the smoothed response as ``lam`` grows; once
        inadmissible actions carry negligible weight the point is a member."""
        lam, total, best = 1.0, 0, math.inf
        lam_max = 60.0 / self.level
        x = np.asarray(x, dtype=float)
        while lam <= lam_max:
            try:
                sol = least_squares(self._residual, x.ravel(), args=(lam,), xtol=1e-12, ftol=1e-12, gtol=1e-12,
                                    max_nfev=200)
            except (ValueError, np.linalg.LinAlgError):
                break
            total += sol.nfev
            x = np.array([sx.project(row) for row in sol.x.reshape(self.game.m, self.game.n)])
            mem = inducible_membership(self.game, x, self.level, self.tol)
            best = min(best, mem.distance)
            if mem.member:
                res = self._finish(mem.profile, mem.beliefs, x, total, "logit-homotopy", restart, t0)
                if res is not None:
                    return _Attempt(res, 0.0, total)
            lam *= 2.0
        return _Attempt(None, best, total)

    # -- stage 3

    def grid_points(self):
        """Conjectures over the observed subpopulations; ``None`` when the
        product grid exceeds the budget."""
        n, k = self.game.n, len(self.observed)
        h = self.grid_step
        while sx.grid_size(n, h) ** k > self.grid_budget:
            h *= 1.5
            if h >= 1:
                break
        pts = sx.grid(n, min(h, 1.0))
        if len(pts) ** k > self.grid_budget:
            return None, h
        return pts, h

    def sweep(self, t0: float, restart: int) -> _Attempt:
        pts, h = self.grid_points()
        if pts is None:
            return _Attempt(None, math.inf, 0)
        k = len(self.observed)
        scored = []
        base = np.tile(sx.barycenter(self.game.n), (self.game.m, 1))
        for idx in np.ndindex(*([len(pts)] * k)):
            x = base.copy()
            for j, i in zip(self.observed, idx):
                x[j] = pts[i]
            mem = inducible_membership(self.game, x, self.level, self.tol)
            if mem.member:
                res = self._finish(mem.profile, mem.beliefs, x, len(scored) + 1, "grid-sweep", restart, t0)
                if res is not None:
                    return _Attempt(res, 0.0, len(scored) + 1)
            # unobserved subpopulations simply take their inducible value
            x = np.where(np.isin(np.arange(self.game.m), self.observed)[:, None], x, mem.nearest)
            scored.append((mem.distance, len(scored), x))
        scored.sort(key=lambda s: (s[0], s[1]))
        best = scored[0][0]
        total = len(scored)
        for _, _, x in scored[:5]:
            att = self.damped(x, restart, t0)
            total += att.iterations
            if att.result is not None:
                att.result.method = "grid-sweep"
                return _Attempt(att.result, 0.0, total)
            best = min(best, att.best)
        return _Attempt(None, best, total)


def _clean(profile: CellProfile, game: CohortGame) -> CellProfile:
    y = np.where(profile.y < 1e-12, 0.0, profile.y)
    y = y / y.sum(axis=2, keepdims=True)
    return CellProfile(y)


def solve_estimated(game: CohortGame, eps: float, *, grid_step: float | None = None, tol: float | None = None,
                    max_restarts: int = 8, seed: int = 0, damping: float = 0.5, max_iter: int = 60,
                    grid_budget: int = 1000, check: bool = True) -> SolveResult:
    """Find and verify an eps-estimated equilibrium of a cohort game."""
    if not isinstance(game, CohortGame):
        raise PreconditionError("the solver works on cohort games")
    if not eps > 0:
        raise PreconditionError(f"eps must be positive, got {eps}")
    tol = eps / 10 if tol is None else tol
    if not tol > 0:
        raise PreconditionError(f"tol must be positive, got {tol}")
    if check:
        ground = check_grounding(game, samples=10, seed=seed)
        if not ground.passed:
            raise PreconditionError(f"grounding fails: {ground.violations[0]}")
    lip, certified = feedback_lipschitz(game)
    level = eps - lip * tol - 2 * SLACK
    if level <= 0:
        raise PreconditionError(f"tol {tol} is too coarse for eps {eps} with feedback modulus {lip:.3g}")
    if grid_step is None:
        grid_step = eps / (8 * lip * math.sqrt(game.n))
    if not 0 < grid_step <= 1:
        raise PreconditionError(f"grid step must lie in (0, 1], got {grid_step}")
    t0 = time.perf_counter()
    search = _Search(game, eps, level, tol, lip, certified, damping, max_iter, grid_step, grid_budget)
    starts = _starts(game, max(1, max_restarts), seed)

    def attempt(args) -> _Attempt:
        i, x = args
        att = search.damped(x, i, t0)
        if att.result is None:
            more = search.homotopy(x, i, t0)
            if more.result is not None:
                more.iterations += att.iterations
                return more
            att.best = min(att.best, more.best)
        return att

    best, total = math.inf, 0
    threads = thread_count()
    if threads == 1:
        outcomes = map(attempt, enumerate(starts))
        for att in outcomes:
            total += att.iterations
            if att.result is not None:
                att.result.iterations = total
                return att.result
            best = min(best, att.best)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            # results are consumed in restart order, so the winner does not
            # depend on scheduling
            for att in pool.map(attempt, enumerate(starts)):
                total += att.iterations
                if att.result is not None:
                    pool.shutdown(wait=False, cancel_futures=True)
                    att.result.iterations = total
                    return att.result
                best = min(best, att.best)
    att = search.sweep(t0, len(starts))
    if att.result is not None:
        att.result.iterations = total + att.iterations
        return att.result
    best = min(best, att.best)
    raise NotFoundError(
        f"no verified fixed point within tol {tol} after {len(starts)} starts and the grid sweep; "
        f"best distance {best:.3g}",
        best,
    )


def utility_lipschitz(game: CohortGame) -> float:
    worst = 0.0
    for mod in equicontinuity_bound(game):
        if not mod.utility.certified:
            raise PreconditionError("solve_nash needs a certified utility modulus")
        worst = max(worst, mod.utility.lipschitz)
    return max(worst, 1e-12)


def solve_nash(game: CohortGame, eps: float, *, tol: float | None = None, seed: int = 0, **options) -> SolveResult:
    """eps-Nash equilibrium through a self-confirming equilibrium of the
    perfect-feedback game at level ``delta / 2`` with ``delta = eps / (2 L)``."""
    if not eps > 0:
        raise PreconditionError(f"eps must be positive, got {eps}")
    delta = eps / (2 * utility_lipschitz(game))
    perfect = game.with_feedback(perfect_feedback())
    level = delta / 2
    res = solve_estimated(perfect, level, tol=level / 10 if tol is None else tol, seed=seed, **options)
    res.nash = verify_nash(game, res.profile, eps)
    if not res.nash.passed:
        raise NotFoundError("self-confirming solution failed the eps-Nash check", math.inf)
    return res


# --------------------------------------------------------------------------- rationalizability certificate


@dataclass
class RationalizableCertificate:
    delta: float
    eps: float
    profile: CellProfile
    beliefs: CohortBeliefs
    report: EquilibriumReport
    induction: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "eps": self.eps,
            "profile": self.profile.y.tolist(),
            "report": self.report.as_dict(),
            "induction": self.induction,
        }


def utility_range(game: CohortGame) -> float:
    worst = 0.0
    for co in game.cohorts:
        u = co.utility
        if isinstance(u, Bilinear):
            worst = max(worst, float(u.matrix.max() - u.matrix.min()))
        else:
            vals = np.array([u.values(z) for z in sx.grid(u.n, 0.1)])
            worst = max(worst, float(vals.max() - vals.min()))
    return worst


def certify_rationalizable(game: CohortGame, delta: float, eps: float = 0.0, *, seed: int = 0,
                           **options) -> RationalizableCertificate:
    """A delta-Nash profile (against each cohort's observed subpopulation) with
    point beliefs on the true observed distribution, whose feedback residual
    is 0."""
    if not delta > 0:
        raise PreconditionError(f"delta must be positive, got {delta}")
    for c, co in enumerate(game.cohorts):
        if isinstance(co.feedback, (Misspecified, CustomFeedback)):
            raise CapabilityError(f"cohort {c}: {co.feedback.kind} feedback does not vanish at the truth")
    if delta >= utility_range(game):
        profile = CellProfile(np.tile(sx.barycenter(game.n), (game.size, game.m, 1)))
        how = "delta exceeds the utility range, so every profile is delta-optimal"
    else:
        res = solve_nash(game, delta, seed=seed, **options)
        profile = res.profile
        how = f"delta-Nash profile found by {res.method}"
    x = game.induced(profile)
    beliefs = CohortBeliefs(tuple({a: x[co.observes] for a in range(game.n)} for co in game.cohorts))
    results, mass = [], Fraction(0)
    for c, co in enumerate(game.cohorts):
        obs = x[co.observes]
        vals = co.utility.values(obs)
        regret = max((float(vals.max() - vals[a]) for a in profile.played(game, c)), default=0.0)
        cons = max((co.feedback_value(a, obs, obs) for a in profile.played(game, c)), default=0.0)
        ok = regret <= delta + 1e-12 and cons <= eps + 1e-12
        if ok:
            mass += co.mass
        results.append(CohortResult(c, co.mass, regret, cons, ok))
    report = EquilibriumReport("rationalizable-certificate", {"delta": delta, "eps": eps}, mass == 1, results, mass,
                               [{str(a): np.asarray(b).tolist() for a, b in d.items()} for d in beliefs.beliefs])
    induction = [
        how,
        "each cohort believes the true distribution of the subpopulation it observes, so the feedback residual is 0",
        "that belief is supported on profiles inducing the same observed distribution, in particular on the profile itself",
        "if the profile survives round k, the point belief on it is admissible in round k + 1, "
        "and the profile is delta-optimal against it, so it survives every round",
    ]
    return RationalizableCertificate(delta, eps, profile, beliefs, report, induction)
