"""Acceptance suite: ten end-to-end criteria with tolerances and time budgets.

Run under pytest (a PASS/FAIL line per criterion is printed in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from nonatomic_eq import counterexamples as cx
from nonatomic_eq import simplex as sx
from nonatomic_eq import tail as tl
from nonatomic_eq.bestresponse import inducible_membership, midpoint_selection_error, stability_radius, witness_holds
from nonatomic_eq.divergence import argmin_over_model_set, chi_squared, hellinger, kl, model_set_from_box, perturb
from nonatomic_eq.equilibrium import tail_residual, verify_nash, verify_sce
from nonatomic_eq.game import (
    Bilinear,
    Message,
    Misspecified,
    Neighborhood,
    equicontinuity_bound,
    perfect_feedback,
    single_cohort_game,
)
from nonatomic_eq.solver import feedback_lipschitz, solve_estimated, solve_nash, utility_lipschitz
from nonatomic_eq.suite import bundled_suite
from oracles import grid_argmin_box

F = Fraction
EPS = 0.05
RESULTS: list[str] = []
_SUITE_CACHE: dict = {}


def _suite_solutions():
    if "estimated" not in _SUITE_CACHE:
        _SUITE_CACHE["estimated"] = [solve_estimated(g, EPS, tol=EPS / 10) for g in bundled_suite()]
    return _SUITE_CACHE["estimated"]


# --------------------------------------------------------------------------- criteria
# each returns (passed, detail)


def sce_threshold_on_density_grid():
    mismatches, counts = 0, []
    for eps in (0.1, 0.25, 0.5, 0.9):
        rows = cx.alnajjar_sce_cross_check(eps)
        mismatches += sum(not r["agree"] for r in rows)
        counts.append(sum(r["verifier"] for r in rows))
    return mismatches == 0, f"mismatches={mismatches} passing densities per eps={counts}"


def sce_construction_residuals():
    worst = 0.0
    ok = True
    game = cx.kpqs_game()
    for eps in (F(1, 10), F(1, 2), F(9, 10)):
        prof, beliefs, t_bar = cx.kpqs_epsilon_sce(eps)
        ok = ok and verify_sce(game, prof, beliefs, eps).passed
        for t in range(t_bar + 1, t_bar + 500):
            got = tail_residual(game, 1, beliefs.belief(1), prof, t)
            worst = max(worst, abs(got - float((min(F(1), eps) + F(1, t)) / 2)))
    return ok and worst <= 1e-12, f"verified={ok} max residual error={worst:.3g}"


def sce_nonexistence_and_variant():
    rep = cx.kpqs_no_sce_check()
    hat = verify_sce(cx.kqrs_hat_game(), tl.TailProfile.with_share(0), tl.TailBeliefs({1: tl.AffineBelief(1)}), 0)
    ok = rep.all_infeasible and len(rep.candidates) == 101 and hat.passed
    return ok, f"candidates={len(rep.candidates)} allInfeasible={rep.all_infeasible} variant SCE at 0={hat.passed}"


def all_eps_nonexistence_and_companion():
    eps_values = (F(1, 5), F(2, 5), F(4, 5))
    rep = cx.alnajjar_no_equilibrium_check(companion_eps=eps_values)
    nash = [verify_nash(cx.alnajjar_game(), tl.TailProfile.with_share(e / 4), e).passed for e in eps_values]
    ok = rep.all_infeasible and all(nash) and all(c["nashPassed"] for c in rep.companion)
    return ok, f"allInfeasible={rep.all_infeasible} companion eps-Nash={nash}"


def solver_existence_sweep():
    games = bundled_suite()
    kinds = set()
    for g in games:
        assert g.n <= 4 and g.m <= 3 and g.size <= 5
        assert all(isinstance(co.utility, Bilinear) for co in g.cohorts)
        for co in g.cohorts:
            fb = co.feedback
            kinds.add("message" if isinstance(fb, Message) else "neighborhood" if isinstance(fb, Neighborhood)
                      else "misspecified" if isinstance(fb, Misspecified) else "other")
    results = _suite_solutions()
    verified = sum(r.verified.passed for r in results)
    ok = verified == len(games) and {"message", "neighborhood", "misspecified"} <= kinds
    methods = {}
    for r in results:
        methods[r.method] = methods.get(r.method, 0) + 1
    return ok, f"verified={verified}/{len(games)} feedback kinds={sorted(kinds)} methods={methods}"


def sce_to_nash_transfer():
    failures = 0
    for g in bundled_suite():
        res = solve_nash(g, EPS)
        delta = EPS / (2 * utility_lipschitz(g))
        sce = verify_sce(g.with_feedback(perfect_feedback()), res.profile, res.beliefs, delta / 2)
        if not (sce.passed and verify_nash(g, res.profile, EPS).passed):
            failures += 1
    return failures == 0, f"failures={failures}/20"


def _random_box(rng, n):
    """Box with positive floor that meets the simplex; small for n = 3 so the
    1e-4 lattice stays affordable."""
    while True:
        if n == 2:
            floor = float(rng.uniform(0.05, 0.2))
            lower = np.full(2, floor)
            upper = np.minimum(1.0, floor + rng.uniform(0.2, 0.9, size=2))
        else:
            centre = rng.dirichlet(np.full(3, 3.0))
            lower = np.maximum(0.05, centre - 0.05)
            upper = np.minimum(1.0, centre + 0.05)
        if lower.sum() < 1 < upper.sum():
            return lower, upper


def projection_against_grid():
    rng = np.random.default_rng(2024)
    worst = 0.0
    kinds = [("kl", 0.1), ("chi-squared", 0.0), ("hellinger", 0.0)]
    for i in range(50):
        name, kappa = kinds[i % 3]
        D = perturb(kl(), kappa) if name == "kl" else {"chi-squared": chi_squared, "hellinger": hellinger}[name]()
        n = 2 if i < 25 else 3
        lower, upper = _random_box(rng, n)
        Q = model_set_from_box(tuple(lower), tuple(upper))
        x = rng.dirichlet(np.ones(n))
        fit = argmin_over_model_set(D, x, Q)
        oracle, _ = grid_argmin_box(name, kappa, x, lower, upper, step=1e-4)
        worst = max(worst, float(np.linalg.norm(fit.point - oracle)))
    return worst <= 1e-3, f"instances=50 max distance to grid argmin={worst:.2e}"


def midpoint_rounding_bound():
    rng = np.random.default_rng(8)
    violations, worst_ratio = 0, 0.0
    for N in (100, 1000):
        for _ in range(50):
            n = int(rng.integers(2, 6))
            m = int(rng.choice([d for d in (1, 2, 4, 5) if N % d == 0]))
            first = rng.integers(0, n, size=N)
            second = rng.integers(0, n, size=N)
            err = midpoint_selection_error(n, m, N, first, second)
            bound = n * m / N
            worst_ratio = max(worst_ratio, err / bound)
            violations += err > bound
    return violations == 0, f"violations={violations} worst error/bound={worst_ratio:.3f}"


def bilinear_modulus_bound():
    rng = np.random.default_rng(99)
    violations = 0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        u = Bilinear(tuple(map(tuple, rng.uniform(size=(n, n)))))
        x, y = rng.dirichlet(np.ones(n), size=2)
        lhs = np.abs(u.values(x) - u.values(y))
        if np.any(lhs > math.sqrt(n) * sx.distance(x, y) + 1e-12):
            violations += 1
    mod = equicontinuity_bound(single_cohort_game(Bilinear(tuple(map(tuple, np.eye(4)))), Neighborhood()))[0]
    ok = violations == 0 and mod.utility.lipschitz <= 2.0 + 1e-12
    return ok, f"violations={violations}/1000 reported modulus n=4: {mod.utility.lipschitz:.4f}"


def stability_under_perturbation():
    rng = np.random.default_rng(31)
    tol = EPS / 10
    members = []
    for g, res in zip(bundled_suite(), _suite_solutions()):
        mem = inducible_membership(g, res.target, EPS, tol)
        if not mem.member:
            continue
        lip, _ = feedback_lipschitz(g)
        rho = stability_radius(g, mem, EPS, tol, lip)
        if rho > 0:
            members.append((g, res.target, mem, rho))
    counter, sampled = 0, 0
    while members and sampled < 200:
        g, x, mem, rho = members[sampled % len(members)]
        d = rng.normal(size=x.shape)
        d -= d.mean(axis=1, keepdims=True)
        d *= rng.uniform(0, rho) / np.max(np.linalg.norm(d, axis=1))
        moved = np.array([sx.project(row) for row in x + d])
        if not witness_holds(g, moved, EPS, tol, mem.profile, mem.beliefs):
            counter += 1
        sampled += 1
    return sampled == 200 and counter == 0, f"games with positive radius={len(members)} samples={sampled} " \
                                            f"counterexamples={counter}"


CRITERIA = [
    (1, "SCE threshold on the density grid", sce_threshold_on_density_grid, 5.0),
    (2, "SCE construction residuals", sce_construction_residuals, 1.0),
    (3, "SCE nonexistence and the variant's SCE", sce_nonexistence_and_variant, 2.0),
    (4, "all-eps nonexistence and eps-Nash companion", all_eps_nonexistence_and_companion, 2.0),
    (5, "solver existence sweep", solver_existence_sweep, 60.0),
    (6, "SCE to Nash transfer", sce_to_nash_transfer, None),
    (7, "divergence projection against grid", projection_against_grid, 30.0),
    (8, "midpoint rounding bound", midpoint_rounding_bound, None),
    (9, "bilinear modulus bound", bilinear_modulus_bound, None),
    (10, "stability under perturbation", stability_under_perturbation, None),
]


def run_criterion(number, title, fn, budget):
    t0 = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - t0
    in_time = budget is None or elapsed < budget
    limit = f" (limit {budget:g} s)" if budget is not None else ""
    line = f"[{'PASS' if ok and in_time else 'FAIL'}] {number:2d}. {title}: {detail}; {elapsed:.2f} s{limit}"
    return ok, in_time, line


@pytest.mark.parametrize("number,title,fn,budget", CRITERIA, ids=[f"criterion_{c[0]:02d}" for c in CRITERIA])
def test_criterion(number, title, fn, budget):
    if number == 5:
        _SUITE_CACHE.clear()  # time the sweep from scratch
    ok, in_time, line = run_criterion(number, title, fn, budget)
    RESULTS.append(line)
    print(line)
    assert ok, line
    assert in_time, line


if __name__ == "__main__":
    failed = 0
    for number, title, fn, budget in CRITERIA:
        ok, in_time, line = run_criterion(number, title, fn, budget)
        print(line, flush=True)
        failed += not (ok and in_time)
    print(f"{len(CRITERIA) - failed}/{len(CRITERIA)} criteria passed")
    sys.exit(1 if failed else 0)
