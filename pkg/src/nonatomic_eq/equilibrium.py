"""Verifiers for the equilibrium notions.

Every verifier returns an :class:`EquilibriumReport`.  For cohort games a
cohort passes when each action it plays (with positive weight in a
positive-mass cell) passes both clauses; the verdict requires the passing
cohorts to carry mass exactly 1.  For tail games each clause is a polynomial
inequality in ``1/t`` that must hold for all players beyond a finite
threshold; finite exception sets carry no mass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import tail as tl
from .bestresponse import OPT_TOL, optimality_residual
from .exact import Poly, fraction_str, to_fraction
from .game import CellProfile, CohortBeliefs, CohortGame, Message, Misspecified, Neighborhood

CONSISTENCY_TOL = 1e-12
NASH_TOL = 1e-12
DEFAULT_EPS_LIST = tuple(Fraction(1, 2**k) for k in range(21))

NOTIONS = (
    "estimated",
    "sce",
    "pce",
    "bne",
    "bne-constrained",
    "nash",
    "alnajjar",
    "kqrs-weak",
    "rationalizable-certificate",
)


class NotionError(ValueError):
    """The game's feedback does not match the requested notion."""


@dataclass
class CohortResult:
    """Residuals of one cohort (cohort games) or one played action (tail games)."""

    index: int
    mass: Fraction
    optimality: float
    consistency: float
    passed: bool
    actions: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "mass": self.mass,
            "optimality": self.optimality,
            "consistency": self.consistency,
            "passed": self.passed,
            "actions": self.actions,
        }


@dataclass
class EquilibriumReport:
    notion: str
    eps: object
    passed: bool
    per_cohort: list[CohortResult]
    pass_mass: Fraction
    witnesses: object = None
    tail: dict | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def as_dict(self) -> dict:
        out = {
            "notion": self.notion,
            "eps": self.eps,
            "verdict": self.verdict,
            "measureOfPassSet": self.pass_mass,
            "perCohort": [c.as_dict() for c in self.per_cohort],
            "notes": list(self.notes),
        }
        if self.tail is not None:
            out["tail"] = self.tail
        if self.witnesses is not None:
            out["witnesses"] = self.witnesses
        return out


# --------------------------------------------------------------------------- cohort games


def _beliefs_dict(beliefs: CohortBeliefs) -> list[dict]:
    return [{str(a): np.asarray(b).tolist() for a, b in sorted(d.items())} for d in beliefs.beliefs]


def _verify_cohorts(game: CohortGame, profile: CellProfile, beliefs: CohortBeliefs, eps: float, notion: str,
                    constrained: bool = False) -> EquilibriumReport:
    profile.validate(game)
    x = game.induced(profile)
    results, mass = [], Fraction(0)
    for c, co in enumerate(game.cohorts):
        obs = x[co.observes]
        worst_opt, worst_cons, ok, per_action = 0.0, 0.0, True, {}
        for a in profile.played(game, c):
            beta = beliefs.belief(c, a)
            if beta is None:
                per_action[str(a)] = {"missing": True}
                ok = False
                worst_opt = worst_cons = math.inf
                continue
            opt = optimality_residual(co.utility, a, beta)
            cons = co.feedback_value(a, beta, obs)
            entry = {"optimality": opt, "consistency": cons}
            a_ok = opt <= OPT_TOL and cons <= eps + CONSISTENCY_TOL
            if constrained:
                inside = co.model_set.contains(beta, 1e-9)
                entry["beliefInModelSet"] = inside
                a_ok = a_ok and inside
            entry["passed"] = a_ok
            per_action[str(a)] = entry
            worst_opt, worst_cons = max(worst_opt, opt), max(worst_cons, cons)
            ok = ok and a_ok
        if ok:
            mass += co.mass
        results.append(CohortResult(c, co.mass, worst_opt, worst_cons, ok, per_action))
    return EquilibriumReport(notion, eps, mass == 1, results, mass, _beliefs_dict(beliefs))


def _cohort_regrets(game: CohortGame, profile: CellProfile):
    profile.validate(game)
    x = game.induced(profile)
    out = []
    for c, co in enumerate(game.cohorts):
        vals = co.utility.values(x[co.observes])
        out.append({a: float(max(vals.max() - vals[a], 0.0)) for a in profile.played(game, c)})
    return out


def _nash_cohorts(game: CohortGame, profile: CellProfile, eps: float, notion: str) -> EquilibriumReport:
    results, mass = [], Fraction(0)
    for c, regrets in enumerate(_cohort_regrets(game, profile)):
        worst = max(regrets.values(), default=0.0)
        ok = worst <= eps + NASH_TOL
        if ok:
            mass += game.cohorts[c].mass
        per_action = {str(a): {"regret": r, "passed": r <= eps + NASH_TOL} for a, r in regrets.items()}
        results.append(CohortResult(c, game.cohorts[c].mass, worst, 0.0, ok, per_action))
    return EquilibriumReport(notion, eps, mass == 1, results, mass)


# --------------------------------------------------------------------------- tail games


def _eps_squared(eps, eps_squared):
    if eps_squared is not None:
        return to_fraction(eps_squared)
    e = to_fraction(eps)
    return e * e


def _tail_report(notion, eps, game: tl.TailGame, profile: tl.TailProfile, per_action, beliefs=None, eps_sq=None):
    results, mass, conds_out, starts = [], Fraction(0), [], []
    for a, conds in per_action.items():
        ok = all(cd.holds for cd in conds)
        if ok:
            mass += profile.base[a]
            starts.extend(cd.settled_after for cd in conds)
        conds_out.extend(cd.as_dict() for cd in conds)
        results.append(CohortResult(a, profile.base[a], 0.0, 0.0, ok, {"conditions": [cd.as_dict() for cd in conds]}))
    passed = mass == 1
    tail = {
        "family": game.family,
        "feedback": game.feedback,
        "density": [fraction_str(v) for v in profile.base],
        "conditions": conds_out,
        "threshold": max(starts, default=0) if passed else None,
        "exceptions": tl.exception_check(game, profile, beliefs, eps_sq),
        "exceptionsDiscarded": len(profile.exceptions),
    }
    return EquilibriumReport(notion, eps, passed, results, mass, tail=tail)


def tail_residual(game: tl.TailGame, a: int, belief: tl.AffineBelief, profile: tl.TailProfile, t: int) -> float:
    """Feedback residual of a tail player ``t`` playing ``a`` under its witness belief."""
    return game.feedback_value(t, a, belief.at(t), profile.base)


def _verify_tail(game: tl.TailGame, profile: tl.TailProfile, beliefs: tl.TailBeliefs, eps, notion,
                 eps_squared=None) -> EquilibriumReport:
    eps_sq = _eps_squared(eps, eps_squared)
    truth = profile.share
    per_action = {}
    for a in profile.played():
        b = beliefs.belief(a)
        if b is None:
            per_action[a] = [tl.TailCondition(a, "missing belief", Poly(()), "==", False, None)]
            continue
        conds = tl.optimality_conditions(game, a, b.poly, start=b.threshold)
        conds.append(tl.consistency_condition(game, a, b.poly, truth, eps_sq, start=b.threshold))
        per_action[a] = conds
    rep = _tail_report(notion, eps, game, profile, per_action, beliefs, eps_sq)
    rep.witnesses = {
        str(a): {"alpha": b.alpha, "gamma": b.gamma, "threshold": b.threshold}
        for a, b in sorted(beliefs.per_action.items())
    }
    return rep


def _nash_tail(game: tl.TailGame, profile: tl.TailProfile, eps, notion) -> EquilibriumReport:
    e = to_fraction(eps)
    per_action = {a: tl.nash_conditions(game, a, profile.share, e) for a in profile.played()}
    return _tail_report(notion, eps, game, profile, per_action)


# --------------------------------------------------------------------------- public verifiers


def verify_estimated(game, profile, beliefs, eps, *, eps_squared=None) -> EquilibriumReport:
    """Both clauses for the game's own feedback: played actions are optimal
    under the witness belief, and the feedback discrepancy is at most ``eps``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if isinstance(game, tl.TailGame):
        return _verify_tail(game, profile, beliefs, eps, "estimated", eps_squared)
    return _verify_cohorts(game, profile, beliefs, eps, "estimated")


def _require(game, kind, notion):
    if isinstance(game, tl.TailGame):
        if notion == "sce" and game.feedback in ("payoff", "perfect"):
            return
        raise NotionError(f"{notion} does not apply to the {game.family} tail game with {game.feedback} feedback")
    for c, co in enumerate(game.cohorts):
        if not isinstance(co.feedback, kind):
            raise NotionError(f"{notion} needs {kind.__name__} feedback; cohort {c} has {co.feedback.kind}")


def verify_sce(game, profile, beliefs, eps, *, eps_squared=None) -> EquilibriumReport:
    _require(game, Message, "sce")
    rep = verify_estimated(game, profile, beliefs, eps, eps_squared=eps_squared)
    rep.notion = "sce"
    return rep


def verify_pce(game, profile, beliefs, eps) -> EquilibriumReport:
    _require(game, Neighborhood, "pce")
    rep = verify_estimated(game, profile, beliefs, eps)
    rep.notion = "pce"
    return rep


def verify_bne(game, profile, beliefs, eps, *, constrained: bool = False) -> EquilibriumReport:
    """Berk-Nash check; ``constrained`` also requires beliefs inside the model set."""
    _require(game, Misspecified, "bne")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return _verify_cohorts(game, profile, beliefs, eps, "bne-constrained" if constrained else "bne", constrained)


def verify_nash(game, profile, eps) -> EquilibriumReport:
    """``u(sigma, x) >= u(a, x) - eps`` at the true distribution of the observed
    subpopulation, for every played action."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if isinstance(game, tl.TailGame):
        return _nash_tail(game, profile, eps, "nash")
    return _nash_cohorts(game, profile, eps, "nash")


def verify_kqrs_weak(game, profile, eps) -> EquilibriumReport:
    """Same inequality as :func:`verify_nash`, but the passing set only needs
    mass at least ``1 - eps``."""
    rep = verify_nash(game, profile, eps)
    rep.notion = "kqrs-weak"
    rep.passed = rep.pass_mass >= 1 - to_fraction(eps)
    return rep


def verify_alnajjar(game, profile, eps_list: Sequence | None = None) -> EquilibriumReport:
    """Full-measure eps-Nash for every eps in ``eps_list``, plus the closed-form
    threshold below which the condition fails for every eps."""
    eps_list = list(DEFAULT_EPS_LIST if eps_list is None else eps_list)
    per_eps = []
    all_ok = True
    for e in eps_list:
        rep = verify_nash(game, profile, e)
        per_eps.append({"eps": to_fraction(e), "passed": rep.passed, "measureOfPassSet": rep.pass_mass})
        all_ok = all_ok and rep.passed
    if isinstance(game, tl.TailGame):
        regrets = {a: tl.limit_regret(game, a, profile.share) for a in profile.played()}
        threshold = max(regrets.values(), default=Fraction(0))
        limit_ok = threshold == 0
        closed = {
            "limitRegret": {str(a): r for a, r in regrets.items()},
            "failsBelow": threshold,
            "case": "x0 > 0" if profile.share > 0 else "x0 = 0",
        }
        results = [CohortResult(a, profile.base[a], float(r), 0.0, r == 0) for a, r in regrets.items()]
        mass = sum((profile.base[a] for a, r in regrets.items() if r == 0), Fraction(0))
    else:
        regrets = _cohort_regrets(game, profile)
        worst = [max(r.values(), default=0.0) for r in regrets]
        threshold = max(worst, default=0.0)
        limit_ok = threshold <= NASH_TOL
        closed = {"exactRegret": threshold, "failsBelow": threshold}
        results = [
            CohortResult(c, game.cohorts[c].mass, w, 0.0, w <= NASH_TOL) for c, w in enumerate(worst)
        ]
        mass = sum((game.cohorts[c].mass for c, w in enumerate(worst) if w <= NASH_TOL), Fraction(0))
    passed = all_ok and limit_ok
    notes = []
    if not limit_ok:
        notes.append(f"the eps-Nash condition fails for every eps below {threshold}; not an equilibrium for all eps")
    rep = EquilibriumReport("alnajjar", eps_list, passed, results, mass, notes=notes)
    rep.tail = {"perEps": per_eps, "closedForm": closed}
    return rep
