"""Command-line front end.

    nonatomic-eq solve estimated|nash|rationalizable GAME --eps E [--delta D] [--tol T] [--grid H] [--seed S]
    nonatomic-eq verify estimated|sce|pce|bne|nash|alnajjar|kqrs GAME PROFILE [BELIEFS] --eps E
    nonatomic-eq examples kpqs|alnajjar|kqrs-hat [--eps E] [--report PATH]
    nonatomic-eq check grounding|equicontinuity GAME

Exit codes: 0 pass or success, 1 verdict fail, 2 usage or input error,
3 the solver found nothing.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import counterexamples as cx
from . import formats as fmt
from . import tail as tl
from .divergence import CapabilityError, ConvergenceError, DivergenceError
from .equilibrium import (
    NotionError,
    verify_alnajjar,
    verify_bne,
    verify_estimated,
    verify_kqrs_weak,
    verify_nash,
    verify_pce,
    verify_sce,
)
from .exact import to_fraction
from .game import CohortGame, GameError, check_grounding, equicontinuity_bound
from .simplex import SimplexError
from .solver import NotFoundError, PreconditionError, certify_rationalizable, solve_estimated, solve_nash

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NOT_FOUND = 0, 1, 2, 3

NEEDS_BELIEFS = ("estimated", "sce", "pce", "bne")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    target: str
    game: str | None = None
    profile: str | None = None
    beliefs: str | None = None
    eps: float | None = None
    delta: float | None = None
    tol: float | None = None
    grid: float | None = None
    seed: int = 0
    eps_list: list[float] | None = None
    format: str = "text"
    output: str | None = None
    report: str | None = None
    profile_out: str | None = None
    beliefs_out: str | None = None
    samples: int = 50
    constrained: bool = False

    def __post_init__(self):
        if self.command == "solve" and self.target != "rationalizable" and self.eps is None:
            raise UsageError("--eps is required")
        if self.command == "solve" and self.eps is not None and self.target != "rationalizable" and not self.eps > 0:
            raise UsageError(f"--eps must be positive, got {self.eps}")
        if self.eps is not None and (self.eps < 0 or not math.isfinite(self.eps)):
            raise UsageError(f"--eps must be a finite nonnegative number, got {self.eps}")
        if self.tol is not None and not self.tol > 0:
            raise UsageError(f"--tol must be positive, got {self.tol}")
        if self.grid is not None and not 0 < self.grid <= 1:
            raise UsageError(f"--grid must lie in (0, 1], got {self.grid}")
        if self.delta is not None and not self.delta > 0:
            raise UsageError(f"--delta must be positive, got {self.delta}")
        if self.eps_list is not None and any(not e > 0 for e in self.eps_list):
            raise UsageError("--eps-list entries must be positive")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nonatomic-eq", description="Solve and verify equilibria of nonatomic games "
                                "with estimation feedback.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--format", choices=("text", "json"), default="text")
        sp.add_argument("--output", help="write the report here instead of stdout")

    s = sub.add_parser("solve", help="search for an equilibrium")
    s.add_argument("target", choices=("estimated", "nash", "rationalizable"))
    s.add_argument("game")
    s.add_argument("--eps", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--tol", type=float)
    s.add_argument("--grid", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--profile-out", help="write the profile file here")
    s.add_argument("--beliefs-out", help="write the beliefs file here")
    common(s)

    v = sub.add_parser("verify", help="check a profile against an equilibrium notion")
    v.add_argument("target", choices=("estimated", "sce", "pce", "bne", "nash", "alnajjar", "kqrs"))
    v.add_argument("game")
    v.add_argument("profile")
    v.add_argument("beliefs", nargs="?")
    v.add_argument("--eps", type=float)
    v.add_argument("--eps-list", type=float, nargs="+")
    v.add_argument("--constrained", action="store_true", help="bne: beliefs must lie in the model set")
    common(v)

    e = sub.add_parser("examples", help="replay the built-in tail games")
    e.add_argument("target", choices=("kpqs", "alnajjar", "kqrs-hat"))
    e.add_argument("--eps", type=float)
    e.add_argument("--eps-list", type=float, nargs="+", help="alnajjar: eps values for the eps-Nash companion")
    e.add_argument("--report", help="also write the machine-readable report here")
    common(e)

    c = sub.add_parser("check", help="check game hypotheses")
    c.add_argument("target", choices=("grounding", "equicontinuity"))
    c.add_argument("game")
    c.add_argument("--samples", type=int, default=50)
    c.add_argument("--seed", type=int, default=0)
    common(c)
    return p


def _config(ns: argparse.Namespace) -> RunConfig:
    names = {f.name for f in dataclasses.fields(RunConfig)}
    values = {k: v for k, v in vars(ns).items() if k in names and v is not None}
    return RunConfig(**values)


# --------------------------------------------------------------------------- commands


def _solve(cfg: RunConfig) -> tuple[dict, int]:
    game = fmt.read_game(cfg.game)
    if not isinstance(game, CohortGame):
        raise UsageError("the solver works on cohort games; use `examples` for the tail families")
    options = {"seed": cfg.seed}
    if cfg.target == "rationalizable":
        if cfg.delta is None:
            raise UsageError("--delta is required")
        cert = certify_rationalizable(game, cfg.delta, cfg.eps or 0.0, **options)
        body = {"command": "solve rationalizable", "certificate": cert.as_dict(), "verdict": cert.report.verdict}
        profile, beliefs = cert.profile, cert.beliefs
        code = EXIT_PASS if cert.report.passed else EXIT_FAIL
    else:
        if cfg.tol is not None:
            options["tol"] = cfg.tol
        if cfg.target == "estimated":
            if cfg.grid is not None:
                options["grid_step"] = cfg.grid
            res = solve_estimated(game, cfg.eps, **options)
        else:
            res = solve_nash(game, cfg.eps, **options)
        body = {"command": f"solve {cfg.target}", "eps": cfg.eps, "result": res.as_dict(), "verdict": "pass"}
        profile, beliefs = res.profile, res.beliefs
        code = EXIT_PASS
    if cfg.profile_out:
        fmt.write_json(fmt.profile_to_dict(profile), cfg.profile_out)
    if cfg.beliefs_out:
        fmt.write_json(fmt.beliefs_to_dict(beliefs), cfg.beliefs_out)
    return fmt.report("solve", body), code


def _verify(cfg: RunConfig) -> tuple[dict, int]:
    game = fmt.read_game(cfg.game)
    profile = fmt.read_profile(game, cfg.profile)
    beliefs = None
    if cfg.target in NEEDS_BELIEFS:
        if cfg.beliefs is None:
            raise UsageError(f"verify {cfg.target} needs a beliefs file")
        beliefs = fmt.read_beliefs(game, cfg.beliefs)
    if cfg.target == "alnajjar":
        rep = verify_alnajjar(game, profile, cfg.eps_list if cfg.eps_list else ([cfg.eps] if cfg.eps else None))
    else:
        if cfg.eps is None:
            raise UsageError("--eps is required")
        if cfg.target == "estimated":
            rep = verify_estimated(game, profile, beliefs, cfg.eps)
        elif cfg.target == "sce":
            rep = verify_sce(game, profile, beliefs, cfg.eps)
        elif cfg.target == "pce":
            rep = verify_pce(game, profile, beliefs, cfg.eps)
        elif cfg.target == "bne":
            rep = verify_bne(game, profile, beliefs, cfg.eps, constrained=cfg.constrained)
        elif cfg.target == "nash":
            rep = verify_nash(game, profile, cfg.eps)
        else:
            rep = verify_kqrs_weak(game, profile, cfg.eps)
    body = {"command": f"verify {cfg.target}", "report": rep.as_dict(), "verdict": rep.verdict}
    return fmt.report("verify", body), EXIT_PASS if rep.passed else EXIT_FAIL


def _kpqs(cfg: RunConfig) -> tuple[dict, bool]:
    eps = cfg.eps if cfg.eps is not None else 0.5
    if not 0 < eps < 1:
        raise UsageError(f"--eps must lie in (0, 1), got {eps}")
    game = cx.kpqs_game()
    profile, beliefs, t_bar = cx.kpqs_epsilon_sce(eps)
    sce = verify_sce(game, profile, beliefs, eps)
    nonexistence = cx.kpqs_no_sce_check()
    ok = sce.passed and nonexistence.all_infeasible
    body = {
        "example": "kpqs",
        "eps": to_fraction(eps),
        "construction": {"threshold": t_bar, "profile": fmt.profile_to_dict(profile),
                         "beliefs": fmt.beliefs_to_dict(beliefs), "sce": sce.as_dict()},
        "nonexistence": nonexistence.as_dict(),
        "verdict": "pass" if ok else "fail",
    }
    return body, ok


def _alnajjar(cfg: RunConfig) -> tuple[dict, bool]:
    eps = cfg.eps if cfg.eps is not None else 0.5
    if not 0 < eps < 1:
        raise UsageError(f"--eps must lie in (0, 1), got {eps}")
    companion_eps = cfg.eps_list or [Fraction(1, 5), Fraction(2, 5), Fraction(4, 5)]
    if any(not 0 < e < 1 for e in companion_eps):
        raise UsageError("--eps-list entries must lie in (0, 1)")
    rows = cx.alnajjar_sce_cross_check(eps)
    mismatches = [r for r in rows if not r["agree"]]
    nonexistence = cx.alnajjar_no_equilibrium_check(companion_eps=companion_eps)
    companion_ok = all(c["scePassed"] and c["nashPassed"] for c in nonexistence.companion)
    ok = not mismatches and nonexistence.all_infeasible and companion_ok
    body = {
        "example": "alnajjar",
        "eps": to_fraction(eps),
        "sceThreshold": {"formula": "eps/sqrt(2)", "value": eps / math.sqrt(2),
                         "largestGridDensity": max((r["density"] for r in rows if r["verifier"]), default=None),
                         "mismatches": mismatches, "gridSize": len(rows)},
        "nonexistence": nonexistence.as_dict(),
        "verdict": "pass" if ok else "fail",
    }
    return body, ok


def _kqrs_hat(cfg: RunConfig) -> tuple[dict, bool]:
    eps = cfg.eps if cfg.eps is not None else 0.0
    game = cx.kqrs_hat_game()
    profile = tl.TailProfile.with_share(0)
    beliefs = tl.TailBeliefs({1: tl.AffineBelief(1)})
    sce = verify_sce(game, profile, beliefs, eps)
    body = {
        "example": "kqrs-hat",
        "eps": to_fraction(eps),
        "profile": fmt.profile_to_dict(profile),
        "beliefs": fmt.beliefs_to_dict(beliefs),
        "sce": sce.as_dict(),
        "verdict": sce.verdict,
    }
    return body, sce.passed


def _examples(cfg: RunConfig) -> tuple[dict, int]:
    run = {"kpqs": _kpqs, "alnajjar": _alnajjar, "kqrs-hat": _kqrs_hat}[cfg.target]
    body, ok = run(cfg)
    out = fmt.report("examples", body)
    if cfg.report:
        fmt.write_json(out, cfg.report)
    # 0 means the reproduction matched: constructions verify and nonexistence is confirmed
    return out, EXIT_PASS if ok else EXIT_FAIL


def _check(cfg: RunConfig) -> tuple[dict, int]:
    game = fmt.read_game(cfg.game)
    if cfg.target == "grounding":
        rep = check_grounding(game, samples=cfg.samples, seed=cfg.seed)
        body = {"command": "check grounding", "report": dataclasses.asdict(rep),
                "verdict": "pass" if rep.passed else "fail"}
        return fmt.report("check", body), EXIT_PASS if rep.passed else EXIT_FAIL
    moduli = equicontinuity_bound(game, seed=cfg.seed)
    certified = all(m.utility.certified and m.feedback.certified for m in moduli)
    body = {"command": "check equicontinuity", "moduli": [dataclasses.asdict(m) for m in moduli],
            "verdict": "pass" if certified else "fail"}
    return fmt.report("check", body), EXIT_PASS if certified else EXIT_FAIL


# --------------------------------------------------------------------------- rendering


def _text(obj, indent: int = 0) -> list[str]:
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        for k in sorted(obj, key=lambda k: (k != "verdict", str(k))):
            v = obj[k]
            if isinstance(v, (dict, list)) and v and any(isinstance(e, (dict, list)) for e in
                                                         (v.values() if isinstance(v, dict) else v)):
                lines.append(f"{pad}{k}:")
                lines.extend(_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {_scalar(v)}")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            lines.append(f"{pad}[{i}]")
            lines.extend(_text(v, indent + 1))
    else:
        lines.append(pad + _scalar(obj))
    return lines


def _scalar(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, float) and math.isfinite(v):
        return repr(v)  # shortest round-trip form reads better than 17 digits
    return fmt.dumps(v, indent=0).replace("\n", " ").strip()


def render(report: dict, form: str) -> str:
    if form == "json":
        return fmt.dumps(report)
    return "\n".join(_text(report)) + "\n"


def main(argv: Sequence[str] | None = None) -> int:
    try:
        ns = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        cfg = _config(ns)
        handler = {"solve": _solve, "verify": _verify, "examples": _examples, "check": _check}[cfg.command]
        report, code = handler(cfg)
    except (UsageError, fmt.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotFoundError as exc:
        print(f"not found: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except (PreconditionError, NotionError, CapabilityError, GameError, SimplexError, tl.TailError,
            DivergenceError, ConvergenceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(report, cfg.format)
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
