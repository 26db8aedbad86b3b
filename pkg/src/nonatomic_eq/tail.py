"""Tail games on the natural numbers under natural density.

Players are ``t = 1, 2, ...``; a profile is described by a base density over
the two actions plus finitely many exceptional players, which carry no mass.
Utilities are closed forms in ``s = 1/t``, so every equilibrium clause becomes
a polynomial inequality in ``s`` whose truth for all large ``t`` is decided
exactly (see :meth:`Poly.eventually`).

Action 0 is the action whose share ``x_0`` enters the payoffs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import Poly, fraction_str, to_fraction

FAMILIES = ("kpqs", "kqrs-hat", "alnajjar")
FEEDBACKS = ("payoff", "perfect", "none")


class TailError(ValueError):
    pass


def _is_zero(value) -> bool:
    return value == 0


@dataclass(frozen=True)
class TailGame:
    """One of the built-in two-action tail families.

    ``kpqs``: u(0, x) = 1/t - x_0, u(1, x) = x_0 - 1/t.
    ``kqrs-hat``: u(0, x) = 1/t - x_0, u(1, x) = 0.
    ``alnajjar``: as ``kpqs`` while x_0 > 0; at x_0 = 0 the payoffs jump to
    u(0, x) = 1, u(1, x) = 1/t.
    """

    family: str
    feedback: str = "payoff"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise TailError(f"unknown tail family {self.family!r}; expected one of {FAMILIES}")
        if self.feedback not in FEEDBACKS:
            raise TailError(f"unknown tail feedback {self.feedback!r}")

    n = 2
    m = 1

    # -- payoffs as polynomials in s, given x_0 as a polynomial

    def utility_poly(self, a: int, x0: Poly) -> Poly:
        _check_action(a)
        s = Poly.s()
        if self.family == "alnajjar" and x0.is_zero:
            return Poly.const(1) if a == 0 else s
        if a == 0:
            return s - x0
        if self.family == "kqrs-hat":
            return Poly(())
        return x0 - s

    def zero_piece(self, x0: Poly) -> bool:
        return self.family == "alnajjar" and x0.is_zero

    # -- pointwise evaluation

    def utility(self, t: int, a: int, beta: Sequence) -> Fraction | float:
        """``u_t(a, beta)``; exact when ``beta`` holds rationals."""
        _check_player(t)
        _check_action(a)
        x0 = beta[0]
        exact = isinstance(x0, (int, Fraction))
        s = Fraction(1, t) if exact else 1.0 / t
        if self.family == "alnajjar" and _is_zero(x0):
            return (1 if a == 0 else s) if exact else (1.0 if a == 0 else s)
        if a == 0:
            return s - x0
        if self.family == "kqrs-hat":
            return Fraction(0) if exact else 0.0
        return x0 - s

    def feedback_value(self, t: int, a: int, beta: Sequence, x: Sequence) -> float:
        if self.feedback == "payoff":
            return float(abs(self.utility(t, a, beta) - self.utility(t, a, x)))
        if self.feedback == "perfect":
            return float(np.linalg.norm(np.asarray(beta, dtype=float) - np.asarray(x, dtype=float)))
        raise TailError("the bare game has no feedback; pick payoff or perfect")

    def induced(self, profile: "TailProfile") -> tuple[Fraction, Fraction]:
        return profile.base

    def moduli(self):
        from .game import CohortModuli, Modulus

        if self.family == "alnajjar":
            jump = Modulus(math.inf, False, "discontinuous at x_0 = 0")
            fb = jump if self.feedback == "payoff" else Modulus(1.0, True, "perfect message: reverse triangle inequality")
            return [CohortModuli(jump, fb)]
        lip = Modulus(1.0, True, "|x_0 - y_0| <= d(x, y)")
        return [CohortModuli(lip, lip)]

    def with_feedback(self, feedback: str) -> "TailGame":
        return TailGame(self.family, feedback)


def _check_player(t: int) -> None:
    if not isinstance(t, (int, np.integer)) or t < 1:
        raise TailError(f"players are natural numbers t >= 1, got {t!r}")


def _check_action(a: int) -> None:
    if a not in (0, 1):
        raise TailError(f"action {a} out of range for 2 actions")


@dataclass(frozen=True)
class TailProfile:
    """Base density ``(p, 1 - p)`` plus finitely many ``(player, action)`` exceptions."""

    base: tuple[Fraction, Fraction]
    exceptions: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        base = tuple(to_fraction(v) for v in self.base)
        if len(base) != 2 or any(v < 0 for v in base) or sum(base) != 1:
            raise TailError(f"base density must be two nonnegative rationals summing to 1, got {self.base}")
        object.__setattr__(self, "base", base)
        exc = tuple((int(t), int(a)) for t, a in self.exceptions)
        for t, a in exc:
            _check_player(t)
            _check_action(a)
        if len({t for t, _ in exc}) != len(exc):
            raise TailError("an exceptional player is listed twice")
        object.__setattr__(self, "exceptions", exc)

    @classmethod
    def with_share(cls, p, exceptions=()) -> "TailProfile":
        p = to_fraction(p)
        return cls((p, 1 - p), exceptions)

    @property
    def share(self) -> Fraction:
        return self.base[0]

    def played(self) -> list[int]:
        """Actions played by a positive-density set of players."""
        return [a for a in (0, 1) if self.base[a] > 0]

    def action_of(self, t: int) -> int | None:
        """Action of an exceptional player, else ``None``: tail players follow
        the base density, which does not pin down individual choices."""
        return dict(self.exceptions).get(t)


@dataclass(frozen=True)
class AffineBelief:
    """``beta(t)_0 = alpha + gamma / t`` for every ``t > threshold``."""

    alpha: Fraction
    gamma: Fraction = Fraction(0)
    threshold: int = 0

    def __post_init__(self):
        object.__setattr__(self, "alpha", to_fraction(self.alpha))
        object.__setattr__(self, "gamma", to_fraction(self.gamma))
        if self.threshold < 0:
            raise TailError("validity threshold must be nonnegative")
        # affine in s, so staying in [0, 1] on (0, 1/(threshold+1)] is an endpoint check
        s_max = Fraction(1, self.threshold + 1)
        for v in (self.alpha, self.alpha + self.gamma * s_max):
            if not 0 <= v <= 1:
                raise TailError(
                    f"belief alpha={fraction_str(self.alpha)}, gamma={fraction_str(self.gamma)} "
                    f"leaves the simplex beyond t = {self.threshold}"
                )

    @property
    def poly(self) -> Poly:
        return Poly.affine(self.alpha, self.gamma)

    def at(self, t: int) -> tuple[Fraction, Fraction]:
        b0 = self.alpha + self.gamma * Fraction(1, t)
        return b0, 1 - b0


@dataclass(frozen=True)
class TailBeliefs:
    """Witness beliefs per played action."""

    per_action: dict = field(default_factory=dict)

    @classmethod
    def shared(cls, belief: AffineBelief) -> "TailBeliefs":
        return cls({0: belief, 1: belief})

    def belief(self, a: int) -> AffineBelief | None:
        return self.per_action.get(a)


# --------------------------------------------------------------------------- tail conditions


@dataclass
class TailCondition:
    """``poly(1/t) relation 0`` for all players beyond ``settled_after``."""

    action: int
    clause: str
    poly: Poly
    relation: str
    holds: bool
    settled_after: int | None

    def as_dict(self) -> dict:
        return {
            "action": self.action,
            "clause": self.clause,
            "polynomial": str(self.poly),
            "relation": self.relation,
            "holdsOnTail": self.holds,
            "tailStart": self.settled_after,
        }


def _condition(action, clause, poly, relation, start=0) -> TailCondition:
    T = poly.first_tail(relation, start)
    return TailCondition(action, clause, poly, relation, T is not None, T)


def optimality_conditions(game: TailGame, a: int, x0: Poly, start: int = 0) -> list[TailCondition]:
    """``u(a, x) - u(b, x) >= 0`` for every other action ``b``."""
    ua = game.utility_poly(a, x0)
    return [
        _condition(a, f"optimal against action {b}", ua - game.utility_poly(b, x0), ">=", start)
        for b in (0, 1)
        if b != a
    ]


def consistency_condition(
    game: TailGame, a: int, belief: Poly, truth: Fraction, eps_squared: Fraction, start: int = 0
) -> TailCondition:
    """Squared feedback discrepancy minus ``eps^2`` stays ``<= 0``."""
    x0 = Poly.const(truth)
    if game.feedback == "payoff":
        diff = game.utility_poly(a, belief) - game.utility_poly(a, x0)
        sq = diff * diff
    elif game.feedback == "perfect":
        diff = belief - x0
        sq = 2 * diff * diff
    else:
        raise TailError("consistency needs payoff or perfect feedback")
    return _condition(a, "feedback within eps", sq - eps_squared, "<=", start)


def nash_conditions(game: TailGame, a: int, truth: Fraction, eps: Fraction) -> list[TailCondition]:
    """``u(a, x) >= u(b, x) - eps`` for every other action ``b``."""
    x0 = Poly.const(truth)
    ua = game.utility_poly(a, x0)
    return [
        _condition(a, f"eps-optimal against action {b}", ua - game.utility_poly(b, x0) + eps, ">=")
        for b in (0, 1)
        if b != a
    ]


def limit_regret(game: TailGame, a: int, truth: Fraction) -> Fraction:
    """``lim_{t -> inf} max_b u(b, x) - u(a, x)`` at the true distribution."""
    x0 = Poly.const(truth)
    ua = game.utility_poly(a, x0)
    return max(Fraction(0), *((game.utility_poly(b, x0) - ua).limit() for b in (0, 1)))


def exception_check(game: TailGame, profile: TailProfile, beliefs: TailBeliefs | None, eps_squared: Fraction | None):
    """Pointwise verdicts for exceptional players (informational: they carry no mass)."""
    out = []
    x = profile.base
    for t, a in profile.exceptions:
        entry = {"player": t, "action": a}
        if beliefs is not None and beliefs.belief(a) is not None and t > beliefs.belief(a).threshold:
            beta = beliefs.belief(a).at(t)
            ua = game.utility(t, a, beta)
            entry["optimal"] = all(ua >= game.utility(t, b, beta) for b in (0, 1))
            if eps_squared is not None:
                entry["residual"] = game.feedback_value(t, a, beta, x)
                entry["consistent"] = _residual_squared(game, t, a, beta, x) <= eps_squared
        else:
            ua = game.utility(t, a, x)
            entry["regret"] = float(max(game.utility(t, b, x) for b in (0, 1)) - ua)
        out.append(entry)
    return out


def _residual_squared(game: TailGame, t, a, beta, x) -> Fraction:
    if game.feedback == "payoff":
        return (game.utility(t, a, beta) - game.utility(t, a, x)) ** 2
    return 2 * (beta[0] - x[0]) ** 2
