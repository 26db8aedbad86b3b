"""Seeded random cohort games and a few classic small games."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from . import simplex as sx
from .divergence import ModelSet, chi_squared, hellinger, kl, perturb
from .game import (
    Bilinear,
    Cohort,
    CohortGame,
    Misspecified,
    Neighborhood,
    constant_utility,
    payoff_feedback,
    perfect_feedback,
    single_cohort_game,
)

FEEDBACK_KINDS = ("neighborhood", "perfect", "payoff", "misspecified")


def _feedback(kind: str, n: int, rng: np.random.Generator):
    if kind == "neighborhood":
        return Neighborhood(), None
    if kind == "perfect":
        return perfect_feedback(), None
    if kind == "payoff":
        return payoff_feedback(), None
    # perturbed, so best fits stay unique when the truth sits on a face
    div = perturb([chi_squared(), hellinger(), kl()][int(rng.integers(3))], 0.5)
    floor = float(rng.choice([0.05, 0.1, 0.15]))
    upper = np.minimum(1.0, floor + rng.uniform(0.4, 1.0, size=n))
    if upper.sum() < 1:
        upper = np.ones(n)
    box = sx.Box((floor,) * n, tuple(upper))
    return Misspecified(div), ModelSet(box, box.min_coordinate())


def random_game(seed: int, kind: str | None = None, *, max_actions: int = 4, max_cover: int = 3,
                max_cohorts: int = 5) -> CohortGame:
    """Random partition game with bilinear payoffs in [0, 1] and rational masses."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_actions + 1))
    m = int(rng.integers(1, max_cover + 1))
    size = int(rng.integers(max(1, m), max_cohorts + 1))
    units = rng.integers(0, 4, size=(size, m))
    for j in range(m):
        if units[:, j].sum() == 0:
            units[rng.integers(size), j] = 1
    for c in range(size):
        if units[c].sum() == 0:
            units[c, rng.integers(m)] = 1
    total = int(units.sum())
    kind = kind or FEEDBACK_KINDS[seed % len(FEEDBACK_KINDS)]
    cohorts = []
    for c in range(size):
        cells = tuple(Fraction(int(k), total) for k in units[c])
        table = np.round(rng.uniform(0, 1, size=(n, n)), 3)
        fb, ms = _feedback(kind, n, rng)
        cohorts.append(Cohort(sum(cells), cells, int(rng.integers(m)), Bilinear(tuple(map(tuple, table))), fb, ms,
                              name=f"cohort-{c}"))
    cover = tuple(Fraction(int(units[:, j].sum()), total) for j in range(m))
    return CohortGame(n, tuple(cohorts), cover, True, name=f"random-{seed}-{kind}")


def bundled_suite(count: int = 20) -> list[CohortGame]:
    """The standard existence sweep: seeds ``0 .. count-1`` cycling through the
    feedback kinds."""
    return [random_game(seed) for seed in range(count)]


def congestion_game(feedback=None) -> CohortGame:
    """Two routes; each route's payoff falls with its own load."""
    return single_cohort_game(Bilinear(((0.0, 1.0), (1.0, 0.0))), feedback or perfect_feedback())


def coordination_game(feedback=None) -> CohortGame:
    return single_cohort_game(Bilinear(((1.0, 0.0), (0.0, 1.0))), feedback or perfect_feedback())


def anti_coordination_game(feedback=None) -> CohortGame:
    return single_cohort_game(Bilinear(((0.0, 1.0), (1.0, 0.0))), feedback or perfect_feedback())


def indifferent_game(n: int = 2, feedback=None) -> CohortGame:
    return single_cohort_game(constant_utility(n), feedback or Neighborhood())
