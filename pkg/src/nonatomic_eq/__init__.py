"""Equilibria of nonatomic games with estimation feedback: exact verifiers,
a fixed-point solver for cohort games, and built-in tail-density games."""
from .counterexamples import (
    CandidateFamily,
    alnajjar_game,
    alnajjar_no_equilibrium_check,
    alnajjar_sce_characterization,
    kpqs_epsilon_sce,
    kpqs_game,
    kpqs_no_sce_check,
    kqrs_hat_game,
)
from .divergence import ModelSet, argmin_over_model_set, chi_squared, hellinger, kl, perturb
from .equilibrium import (
    EquilibriumReport,
    verify_alnajjar,
    verify_bne,
    verify_estimated,
    verify_kqrs_weak,
    verify_nash,
    verify_pce,
    verify_sce,
)
from .game import (
    Bilinear,
    CellProfile,
    Cohort,
    CohortBeliefs,
    CohortGame,
    Misspecified,
    Neighborhood,
    check_grounding,
    equicontinuity_bound,
    payoff_feedback,
    perfect_feedback,
    single_cohort_game,
)
from .solver import NotFoundError, certify_rationalizable, solve_estimated, solve_nash
from .tail import AffineBelief, TailBeliefs, TailGame, TailProfile

__version__ = "0.1.0"

__all__ = [
    "AffineBelief",
    "alnajjar_game",
    "alnajjar_no_equilibrium_check",
    "alnajjar_sce_characterization",
    "argmin_over_model_set",
    "Bilinear",
    "CandidateFamily",
    "CellProfile",
    "certify_rationalizable",
    "check_grounding",
    "chi_squared",
    "Cohort",
    "CohortBeliefs",
    "CohortGame",
    "equicontinuity_bound",
    "EquilibriumReport",
    "hellinger",
    "kl",
    "kpqs_epsilon_sce",
    "kpqs_game",
    "kpqs_no_sce_check",
    "kqrs_hat_game",
    "Misspecified",
    "ModelSet",
    "Neighborhood",
    "NotFoundError",
    "payoff_feedback",
    "perfect_feedback",
    "perturb",
    "single_cohort_game",
    "solve_estimated",
    "solve_nash",
    "TailBeliefs",
    "TailGame",
    "TailProfile",
    "verify_alnajjar",
    "verify_bne",
    "verify_estimated",
    "verify_kqrs_weak",
    "verify_nash",
    "verify_pce",
    "verify_sce",
]
