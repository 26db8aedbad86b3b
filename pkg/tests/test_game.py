import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonatomic_eq import simplex as sx
from nonatomic_eq.divergence import ModelSet, chi_squared
from nonatomic_eq.game import (
    Bilinear,
    CellProfile,
    Cohort,
    CohortGame,
    ContinuousUtility,
    CustomFeedback,
    GameError,
    Misspecified,
    Neighborhood,
    check_grounding,
    constant_utility,
    equicontinuity_bound,
    payoff_feedback,
    perfect_feedback,
    single_cohort_game,
    tabulated_utility,
)
from nonatomic_eq.suite import random_game

F = Fraction
IDENTITY = ((1.0, 0.0), (0.0, 1.0))


def two_cohort_game(feedback=None):
    fb = feedback or Neighborhood()
    cohorts = (
        Cohort(F(1, 2), (F(1, 2),), 0, Bilinear(IDENTITY), fb),
        Cohort(F(1, 2), (F(1, 2),), 0, Bilinear(IDENTITY), fb),
    )
    return CohortGame(2, cohorts, (F(1),))


def test_induced_examples():
    g = single_cohort_game(constant_utility(3), Neighborhood())
    assert np.allclose(g.induced(CellProfile.uniform_rows(g, [[1, 0, 0]])), [[1, 0, 0]])
    g2 = two_cohort_game()
    assert np.allclose(g2.induced(CellProfile.uniform_rows(g2, [[1, 0], [0, 1]])), [[0.5, 0.5]])


def test_induced_with_cover():
    # cohort 0 sits in both subpopulations, cohort 1 only in the second
    cohorts = (
        Cohort(F(1, 2), (F(1, 2), F(1, 2)), 0, Bilinear(IDENTITY), Neighborhood()),
        Cohort(F(1, 2), (F(0), F(1, 2)), 1, Bilinear(IDENTITY), Neighborhood()),
    )
    g = CohortGame(2, cohorts, (F(1, 2), F(1)), partition=False)
    x = g.induced(CellProfile.uniform_rows(g, [[1, 0], [0, 1]]))
    assert np.allclose(x, [[1, 0], [0.5, 0.5]])
    with pytest.raises(GameError):
        CellProfile(np.array([[[1, 0], [0, 1]], [[0, 1], [0, 1]]], dtype=float)).validate(g)


def test_utility_and_feedback_examples():
    g = single_cohort_game(Bilinear(IDENTITY), Neighborhood())
    assert g.utility(0, 0, [0.3, 0.7]) == pytest.approx(0.3)
    x = np.array([0.2, 0.8])
    assert g.feedback(0, 0, x, x) == 0
    assert g.feedback(0, 1, [0.5, 0.5], [0, 1]) == pytest.approx(math.sqrt(0.5))
    gp = single_cohort_game(Bilinear(IDENTITY), perfect_feedback())
    assert gp.feedback(0, 1, [0.5, 0.5], [0, 1]) == g.feedback(0, 1, [0.5, 0.5], [0, 1])
    gu = single_cohort_game(Bilinear(IDENTITY), payoff_feedback())
    assert gu.feedback(0, 1, [0.5, 0.5], [0, 1]) == pytest.approx(0.5)
    with pytest.raises(GameError):
        g.utility(0, 2, [0.5, 0.5])


def test_validation_errors():
    u = Bilinear(IDENTITY)
    with pytest.raises(GameError):
        Bilinear(((1.5, 0.0), (0.0, 1.0)))
    with pytest.raises(GameError):
        CohortGame(2, (Cohort(F(1, 2), (F(1, 2),), 0, u, Neighborhood()),), (F(1, 2),))
    with pytest.raises(GameError):
        CohortGame(2, (Cohort(F(1), (F(1),), 1, u, Neighborhood()),), (F(1),))
    with pytest.raises(GameError):
        CohortGame(2, (Cohort(F(1), (F(1, 2), F(1, 2)), 0, u, Neighborhood()),), (F(1, 2), F(1, 4)))
    with pytest.raises(GameError):
        Cohort(F(1), (F(1),), 0, u, Misspecified(chi_squared()))
    with pytest.raises(GameError):
        single_cohort_game(u, Neighborhood()).induced(CellProfile(np.ones((1, 1, 3)) / 3))


def test_normalized_tables():
    b = Bilinear.normalized([[0, -1], [-1, 0]])
    assert np.allclose(b.matrix, [[1, 0], [0, 1]])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 19), st.integers(0, 10**6))
def test_mass_conservation_and_mixture_linearity(seed, draw):
    g = random_game(seed)
    rng = np.random.default_rng(draw)
    y1 = rng.dirichlet(np.ones(g.n), size=(g.size, g.m))
    y2 = rng.dirichlet(np.ones(g.n), size=(g.size, g.m))
    t = rng.uniform()
    x1, x2 = g.induced(CellProfile(y1)), g.induced(CellProfile(y2))
    assert np.allclose(x1.sum(axis=1), 1, atol=1e-12)
    mix = g.induced(CellProfile(t * y1 + (1 - t) * y2))
    assert np.allclose(mix, t * x1 + (1 - t) * x2, atol=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_feedback_nonnegative_and_grounded(seed):
    g = random_game(seed)
    rng = np.random.default_rng(seed)
    for co in g.cohorts:
        for _ in range(20):
            x, beta = rng.dirichlet(np.ones(g.n), size=2)
            for a in range(g.n):
                assert co.feedback_value(a, beta, x) >= 0
                if co.feedback.strongly_grounded:
                    assert co.feedback_value(a, x, x) == 0


def test_check_grounding_examples():
    assert check_grounding(single_cohort_game(Bilinear(IDENTITY), Neighborhood()), samples=20).passed
    Q = ModelSet(sx.lower_bounded(2, 0.2), 0.2)
    assert check_grounding(single_cohort_game(Bilinear(IDENTITY), Misspecified(chi_squared()), Q), samples=20).passed
    one = single_cohort_game(Bilinear(IDENTITY), CustomFeedback(lambda a, b, x: 1.0, lipschitz=0.0))
    rep = check_grounding(one, samples=5)
    assert not rep.passed and rep.violations[0]["residual"] == pytest.approx(1.0)
    distance = single_cohort_game(Bilinear(IDENTITY), CustomFeedback(lambda a, b, x: float(abs(b[0] - x[0]))))
    assert check_grounding(distance, samples=5).passed


def test_equicontinuity_examples():
    mods = equicontinuity_bound(single_cohort_game(Bilinear(IDENTITY), Neighborhood()))
    assert mods[0].utility.lipschitz == pytest.approx(math.sqrt(2)) and mods[0].utility.certified
    assert mods[0].feedback.lipschitz == 1 and mods[0].feedback.certified
    pay = equicontinuity_bound(single_cohort_game(Bilinear(IDENTITY), payoff_feedback()))
    assert pay[0].feedback.lipschitz == pytest.approx(math.sqrt(2))
    wavy = ContinuousUtility(lambda b: np.array([np.sin(3 * b[0]), 0.0]), 2)
    est = equicontinuity_bound(single_cohort_game(wavy, Neighborhood()))
    assert not est[0].utility.certified and est[0].utility.lipschitz > 0


def test_tabulated_utility_interpolates_lattice():
    pts = sx.grid(3, 0.25)
    B = Bilinear(((0.1, 0.5, 0.9), (0.3, 0.3, 0.3), (1.0, 0.0, 0.2)))
    u = tabulated_utility(pts, [B.values(p) for p in pts], lipschitz=math.sqrt(3))
    rng = np.random.default_rng(0)
    for x in rng.dirichlet(np.ones(3), size=100):
        assert np.allclose(u.values(x), B.values(x), atol=1e-12)
    # a nonlinear table is matched exactly at lattice points
    vals = np.array([[p[0] ** 2, p[1] * p[2], 0.5] for p in pts])
    v = tabulated_utility(pts, vals)
    for p, row in zip(pts, vals):
        assert np.allclose(v.values(p), row)
    with pytest.raises(GameError):
        tabulated_utility(pts[:-1], vals[:-1])
