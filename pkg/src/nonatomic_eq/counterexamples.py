"""The built-in tail games and their equilibrium (non)existence arguments,
replayed with exact rationals.

Nonexistence is shown per candidate density ``p`` of action 0.  Each argument
depends on ``p`` only through its sign and a threshold computed from ``p``, so
a candidate grid covers the continuum cell by cell: every ``p`` in an open
grid cell follows the same case with its own threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import tail as tl
from .equilibrium import verify_nash, verify_sce
from .exact import fraction_str, rational_grid, to_fraction


def kpqs_game() -> tl.TailGame:
    return tl.TailGame("kpqs", "payoff")


def kqrs_hat_game() -> tl.TailGame:
    return tl.TailGame("kqrs-hat", "payoff")


def alnajjar_game(feedback: str = "none") -> tl.TailGame:
    """The bare game; pass ``feedback="perfect"`` for the augmented version."""
    return tl.TailGame("alnajjar", feedback)


@dataclass(frozen=True)
class CandidateFamily:
    """Candidate densities of action 0 (rational, endpoints included)."""

    densities: tuple[Fraction, ...]
    exception_budget: int = 0

    def __post_init__(self):
        d = tuple(to_fraction(p) for p in self.densities)
        if any(not 0 <= p <= 1 for p in d):
            raise ValueError("candidate densities must lie in [0, 1]")
        if 0 not in d or 1 not in d:
            raise ValueError("candidate grid must include 0 and 1 exactly")
        object.__setattr__(self, "densities", d)

    @classmethod
    def uniform(cls, count: int = 101, exception_budget: int = 0) -> "CandidateFamily":
        return cls(tuple(rational_grid(count)), exception_budget)


@dataclass
class CandidateVerdict:
    density: Fraction
    feasible: bool
    case: str
    trace: list[str]

    def as_dict(self) -> dict:
        return {"density": self.density, "feasible": self.feasible, "case": self.case, "trace": self.trace}


@dataclass
class NonexistenceReport:
    game: str
    notion: str
    candidates: list[CandidateVerdict]
    reduction: str
    companion: list[dict] = field(default_factory=list)

    @property
    def all_infeasible(self) -> bool:
        return not any(c.feasible for c in self.candidates)

    def as_dict(self) -> dict:
        return {
            "game": self.game,
            "notion": self.notion,
            "allInfeasible": self.all_infeasible,
            "candidates": [c.as_dict() for c in self.candidates],
            "reduction": self.reduction,
            "companion": self.companion,
        }


# --------------------------------------------------------------------------- kpqs


def epsilon_bar(eps) -> Fraction:
    return min(Fraction(1), to_fraction(eps))


def kpqs_threshold(eps) -> int:
    """Smallest ``t`` with ``1/t < min(1, eps)`` for every later player as well."""
    eb = epsilon_bar(eps)
    return math.floor(1 / eb) + 1


def kpqs_epsilon_sce(eps) -> tuple[tl.TailProfile, tl.TailBeliefs, int]:
    """Everyone beyond the threshold plays action 1 and believes
    ``beta(t)_0 = (min(1, eps) + 1/t) / 2``."""
    e = to_fraction(eps)
    if not 0 < e < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    t_bar = kpqs_threshold(e)
    eb = epsilon_bar(e)
    profile = tl.TailProfile((Fraction(0), Fraction(1)))
    belief = tl.AffineBelief(eb / 2, Fraction(1, 2), t_bar)
    return profile, tl.TailBeliefs({1: belief}), t_bar


def _kpqs_candidate(p: Fraction) -> CandidateVerdict:
    if p > 0:
        t_bar = math.floor(2 / p)
        t = t_bar + 1
        # 2/t - p is decreasing in t, so checking t_bar + 1 covers the tail
        gap = Fraction(2, t) - p
        ok = gap < 0
        trace = [
            f"x0 = {fraction_str(p)} > 0; tail threshold t_bar = {t_bar}",
            f"2/{t} - x0 = {fraction_str(gap)} < 0: {ok}",
            "a tail player on action 0 needs 0 <= beta_0 <= 2/t - x0 < 0, impossible",
            "so the tail plays action 1, the density of action 0 is 0, contradicting x0 > 0",
        ]
        return CandidateVerdict(p, not ok, "x0 > 0", trace)
    # x0 = 0: matching messages force beta_0 = 0, and then optimality of action 1 needs 0 >= 2/t
    checks = all(Fraction(2, t) > 0 for t in (1, 2, 10**6))
    trace = [
        "x0 = 0; a player on action 1 has beta_0 = x0 = 0 from the message equality",
        "optimality of action 1 then needs 0 >= 2/t > 0, impossible for every t",
        "so optimizing players play action 0, the density of action 0 is 1, contradicting x0 = 0",
    ]
    return CandidateVerdict(p, not checks, "x0 = 0", trace)


def kpqs_no_sce_check(candidates: CandidateFamily | None = None) -> NonexistenceReport:
    candidates = candidates or CandidateFamily.uniform()
    verdicts = [_kpqs_candidate(p) for p in candidates.densities]
    reduction = (
        "each case uses p only through its sign and the threshold floor(2/p); "
        "for every p > 0 the chain 2/t - p < 0 holds beyond that threshold, so the grid "
        "result extends to all of (0, 1]; exceptions are finite and carry no density"
    )
    return NonexistenceReport("kpqs", "sce", verdicts, reduction)


# --------------------------------------------------------------------------- alnajjar


def alnajjar_sce_characterization(eps, p) -> bool:
    """``p <= eps / sqrt(2)``, decided exactly as ``2 p^2 <= eps^2``."""
    e, p = to_fraction(eps), to_fraction(p)
    if not 0 < e < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not 0 <= p <= 1:
        raise ValueError(f"density must lie in [0, 1], got {p}")
    return 2 * p * p <= e * e


def _belief_candidates(p: Fraction) -> list[tl.AffineBelief]:
    pairs = [(0, 0), (0, 1), (1, 0), (1, -1), (p, 0), (p, 1), (p, -1)]
    out = []
    for alpha, gamma in pairs:
        for threshold in (0, 1, 2):
            try:
                out.append(tl.AffineBelief(alpha, gamma, threshold))
                break
            except tl.TailError:
                continue
    return out


def best_sce_beliefs(game: tl.TailGame, p, eps, eps_squared=None):
    """Search the affine belief family for witnesses making the density-``p``
    profile an eps-SCE.  Returns ``(report, beliefs)`` for the first passing
    belief of each played action, falling back to the first candidate."""
    profile = tl.TailProfile.with_share(p)
    chosen = {}
    cands = _belief_candidates(profile.share)
    for a in profile.played():
        for b in cands:
            rep = verify_sce(game, profile, tl.TailBeliefs({a: b}), eps, eps_squared=eps_squared)
            if rep.per_cohort[[r.index for r in rep.per_cohort].index(a)].passed:
                chosen[a] = b
                break
        else:
            chosen[a] = cands[0]
    beliefs = tl.TailBeliefs(chosen)
    return verify_sce(game, profile, beliefs, eps, eps_squared=eps_squared), beliefs


def alnajjar_sce_cross_check(eps, candidates: CandidateFamily | None = None) -> list[dict]:
    """Compare the closed-form characterization with a verifier search over
    affine beliefs on every candidate density of the perfect-feedback game."""
    candidates = candidates or CandidateFamily.uniform()
    game = alnajjar_game("perfect")
    rows = []
    for p in candidates.densities:
        rep, _ = best_sce_beliefs(game, p, eps)
        expected = alnajjar_sce_characterization(eps, p)
        rows.append({"density": p, "characterization": expected, "verifier": rep.passed,
                     "agree": expected == rep.passed})
    return rows


def _alnajjar_candidate(p: Fraction) -> CandidateVerdict:
    if p > 0:
        # t_k >= k along a strictly increasing sequence, so p <= 1/t_k + 1/(2k) <= 3/(2k)
        k = math.floor(Fraction(3, 2) / p) + 1
        bound = Fraction(3, 2 * k)
        ok = bound < p
        trace = [
            f"x0 = {fraction_str(p)} > 0; players on action 0 in O_(1/k) satisfy x0 <= 1/t_k + 1/(2k)",
            f"with t_k >= k this gives x0 <= 3/(2k); at k = {k}: 3/(2k) = {fraction_str(bound)} < x0: {ok}",
            "contradiction: no profile with x0 > 0 is eps-Nash for every eps",
        ]
        return CandidateVerdict(p, not ok, "x0 > 0", trace)
    k = 3
    lhs, rhs = Fraction(1, k), 1 - Fraction(1, k)
    ok = lhs < rhs
    trace = [
        "x0 = 0; players on action 1 in O_(1/k) satisfy 1/t_k >= 1 - 1/k",
        f"with t_k >= k: at k = {k}, 1/t_k <= {fraction_str(lhs)} < {fraction_str(rhs)}: {ok}",
        "passing to the limit gives 0 >= 1, a contradiction",
    ]
    return CandidateVerdict(p, not ok, "x0 = 0", trace)


def alnajjar_companion(eps_values: Sequence) -> list[dict]:
    """For each eps, the density ``eps/4`` profile: an eps/(2 sqrt 2)-SCE of the
    perfect-feedback game that is also an eps-Nash equilibrium."""
    out = []
    bare = alnajjar_game()
    augmented = alnajjar_game("perfect")
    for eps in eps_values:
        e = to_fraction(eps)
        p = e / 4
        sce, beliefs = best_sce_beliefs(augmented, p, float(e) / (2 * math.sqrt(2)), eps_squared=e * e / 8)
        nash = verify_nash(bare, tl.TailProfile.with_share(p), e)
        out.append({
            "eps": e,
            "density": p,
            "sceLevel": "eps/(2*sqrt(2))",
            "scePassed": sce.passed,
            "nashPassed": nash.passed,
            "nashThreshold": nash.tail["threshold"],
        })
    return out


def alnajjar_no_equilibrium_check(candidates: CandidateFamily | None = None,
                                  companion_eps: Sequence = (Fraction(1, 5), Fraction(2, 5), Fraction(4, 5))
                                  ) -> NonexistenceReport:
    candidates = candidates or CandidateFamily.uniform()
    verdicts = [_alnajjar_candidate(p) for p in candidates.densities]
    reduction = (
        "each case uses p only through its sign and the index floor(3/(2p)) + 1; "
        "for every p > 0 that index yields 3/(2k) < p, so the grid result extends to all of (0, 1]"
    )
    return NonexistenceReport("alnajjar", "alnajjar", verdicts, reduction, alnajjar_companion(companion_eps))
