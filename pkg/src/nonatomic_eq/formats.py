"""File formats: game, profile and beliefs files in, canonical JSON reports out.

Masses and tail densities accept JSON numbers, decimal strings or ``"p/q"``
strings and are read as exact rationals.  Reports are written with sorted
keys, floats at 17 significant digits and rationals as ``"p/q"`` so that they
round-trip exactly and are byte-identical across runs.
"""
from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import AfterValidator, BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import simplex as sx
from . import tail as tl
from .divergence import DivergenceError, ModelSet, chi_squared, hellinger, kl, perturb
from .exact import fraction_str, to_fraction
from .game import (
    Bilinear,
    CellProfile,
    Cohort,
    CohortBeliefs,
    CohortGame,
    GameError,
    Misspecified,
    Neighborhood,
    payoff_feedback,
    perfect_feedback,
    tabulated_utility,
)

REPORT_SCHEMA = "nonatomic-eq/report/1"
GAME_SCHEMA = "nonatomic-eq/game/1"
PROFILE_SCHEMA = "nonatomic-eq/profile/1"
BELIEFS_SCHEMA = "nonatomic-eq/beliefs/1"

class FormatError(ValueError):
    """Input file could not be read; the message carries line or field details."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


def _rational(v):
    try:
        to_fraction(v)
    except (TypeError, ValueError) as exc:
        raise ValueError(str(exc)) from None
    return v


# kept as given so the schema shows number-or-string; converted when building
Rational = Annotated[Union[int, float, str], AfterValidator(_rational)]


# --------------------------------------------------------------------------- game files


class CoverElement(_Model):
    mass: Rational


class Cell(_Model):
    j: int = Field(ge=0)
    mass: Rational


class BilinearSpec(_Model):
    kind: Literal["bilinear"]
    table: list[list[float]]


class TabulatedSpec(_Model):
    kind: Literal["tabulated"]
    points: list[list[float]]
    payoffs: list[list[float]]
    lipschitz: float | None = Field(default=None, gt=0)


UtilitySpec = Annotated[Union[BilinearSpec, TabulatedSpec], Field(discriminator="kind")]


class SimpleFeedbackSpec(_Model):
    kind: Literal["neighborhood", "perfect", "payoff"]


class MisspecifiedSpec(_Model):
    kind: Literal["misspecified"]
    divergence: Literal["kl", "chi-squared", "hellinger"]
    kappa: float = Field(default=0.0, ge=0)


FeedbackSpec = Annotated[Union[SimpleFeedbackSpec, MisspecifiedSpec], Field(discriminator="kind")]


class BoxSpec(_Model):
    kind: Literal["box"]
    lower: list[float]
    upper: list[float]
    floor: float | None = Field(default=None, gt=0)


class HullSpec(_Model):
    kind: Literal["hull"]
    vertices: list[list[float]]
    floor: float | None = Field(default=None, gt=0)


ModelSetSpec = Annotated[Union[BoxSpec, HullSpec], Field(discriminator="kind")]


class CohortSpec(_Model):
    name: str = ""
    mass: Rational
    cells: list[Cell]
    observes: int = Field(ge=0)
    utility: UtilitySpec
    feedback: FeedbackSpec
    model_set: ModelSetSpec | None = Field(default=None, alias="modelSet")


class CohortGameSpec(_Model):
    schema_: str = Field(default=GAME_SCHEMA, alias="schema")
    name: str = ""
    actions: int = Field(ge=2)
    partition: bool = True
    cover: list[CoverElement] = Field(min_length=1)
    cohorts: list[CohortSpec] = Field(min_length=1)


class TailGameSpec(_Model):
    schema_: str = Field(default=GAME_SCHEMA, alias="schema")
    name: str = ""
    tail_family: Literal["kpqs", "kqrs-hat", "alnajjar"] = Field(alias="tailFamily")
    feedback: Literal["payoff", "perfect", "none"] | None = None


# --------------------------------------------------------------------------- profile and beliefs files


class ProfileSpec(_Model):
    schema_: str = Field(default=PROFILE_SCHEMA, alias="schema")
    base: list[Rational] | list[list[Rational]] | list[list[list[Rational]]]
    exceptions: list[tuple[int, int]] = Field(default_factory=list)


class AffineSpec(_Model):
    alpha: Rational
    gamma: Rational = 0
    threshold: int = Field(default=0, ge=0)


class BeliefsSpec(_Model):
    schema_: str = Field(default=BELIEFS_SCHEMA, alias="schema")
    per_cohort: list[list[float] | dict[str, list[float]]] | None = Field(default=None, alias="perCohort")
    affine: AffineSpec | dict[str, AffineSpec] | None = None

    @field_validator("affine")
    @classmethod
    def _actions(cls, v):
        if isinstance(v, dict) and any(k not in ("0", "1") for k in v):
            raise ValueError("tail beliefs are keyed by action 0 or 1")
        return v


# --------------------------------------------------------------------------- reading


def _load_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _validation_message(path, exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "(top level)"
        lines.append(f"{path}: field {where}: {err['msg']}")
    return "\n".join(lines)


def _parse(model, data, path):
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise FormatError(_validation_message(path, exc)) from None


_DIVERGENCES = {"kl": kl, "chi-squared": chi_squared, "hellinger": hellinger}


def _model_set(spec, n: int) -> ModelSet:
    if isinstance(spec, BoxSpec):
        shape = sx.Box(tuple(spec.lower), tuple(spec.upper))
    else:
        shape = sx.VertexHull(tuple(tuple(v) for v in spec.vertices))
    if shape.n != n:
        raise GameError(f"model set has dimension {shape.n}, game has {n} actions")
    return ModelSet(shape, spec.floor if spec.floor is not None else shape.min_coordinate())


def _feedback(spec):
    if isinstance(spec, MisspecifiedSpec):
        D = _DIVERGENCES[spec.divergence]()
        return Misspecified(perturb(D, spec.kappa) if spec.kappa else D)
    return {"neighborhood": Neighborhood, "perfect": perfect_feedback, "payoff": payoff_feedback}[spec.kind]()


def _cohort_game(spec: CohortGameSpec) -> CohortGame:
    m = len(spec.cover)
    cohorts = []
    for i, cs in enumerate(spec.cohorts):
        where = f"cohorts.{i}"
        try:
            cells = [Fraction(0)] * m
            for cell in cs.cells:
                if cell.j >= m:
                    raise GameError(f"cell refers to cover element {cell.j}, only {m} declared")
                cells[cell.j] += to_fraction(cell.mass)
            if isinstance(cs.utility, BilinearSpec):
                utility = Bilinear(tuple(tuple(r) for r in cs.utility.table))
            else:
                utility = tabulated_utility(cs.utility.points, cs.utility.payoffs, cs.utility.lipschitz)
            feedback = _feedback(cs.feedback)
            model_set = _model_set(cs.model_set, spec.actions) if cs.model_set is not None else None
            cohorts.append(Cohort(to_fraction(cs.mass), tuple(cells), cs.observes, utility, feedback, model_set,
                                  name=cs.name or f"cohort-{i}"))
        except (GameError, DivergenceError, sx.SimplexError, ValueError, TypeError) as exc:
            raise FormatError(f"field {where}: {exc}") from None
    try:
        return CohortGame(spec.actions, tuple(cohorts), tuple(to_fraction(c.mass) for c in spec.cover),
                          spec.partition, name=spec.name)
    except (GameError, ValueError, TypeError) as exc:
        raise FormatError(f"game: {exc}") from None


def game_from_dict(data, path="<game>"):
    """Build a :class:`CohortGame` or :class:`TailGame` from parsed JSON."""
    if not isinstance(data, dict):
        raise FormatError(f"{path}: top level must be an object")
    if "tailFamily" in data:
        spec = _parse(TailGameSpec, data, path)
        default = "none" if spec.tail_family == "alnajjar" else "payoff"
        return tl.TailGame(spec.tail_family, spec.feedback or default)
    spec = _parse(CohortGameSpec, data, path)
    try:
        return _cohort_game(spec)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def read_game(path):
    return game_from_dict(_load_json(path), path)


def profile_from_dict(game, data, path="<profile>"):
    spec = _parse(ProfileSpec, data, path)
    try:
        if isinstance(game, tl.TailGame):
            if isinstance(spec.base[0], list):
                raise FormatError("a tail profile has a base density vector of two entries")
            return tl.TailProfile(tuple(spec.base), tuple(spec.exceptions))
        if spec.exceptions:
            raise FormatError("exceptions apply to tail games only")
        y = np.array(spec.base, dtype=object)
        y = np.vectorize(lambda v: float(to_fraction(v)), otypes=[float])(y)
        if y.ndim == 1:
            y = np.tile(y, (game.size, 1))
        if y.ndim == 2:
            y = np.repeat(y[:, None, :], game.m, axis=1)
        profile = CellProfile(y)
        profile.validate(game)
        return profile
    except (GameError, tl.TailError, ValueError, TypeError) as exc:
        raise FormatError(f"{path}: field base: {exc}") from None
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def read_profile(game, path):
    return profile_from_dict(game, _load_json(path), path)


def beliefs_from_dict(game, data, path="<beliefs>"):
    spec = _parse(BeliefsSpec, data, path)
    try:
        if isinstance(game, tl.TailGame):
            if spec.affine is None:
                raise FormatError("tail games take an affine belief family")
            if isinstance(spec.affine, AffineSpec):
                return tl.TailBeliefs.shared(_affine(spec.affine))
            return tl.TailBeliefs({int(a): _affine(b) for a, b in spec.affine.items()})
        if spec.per_cohort is None:
            raise FormatError("cohort games take perCohort beliefs")
        if len(spec.per_cohort) != game.size:
            raise FormatError(f"perCohort lists {len(spec.per_cohort)} entries for {game.size} cohorts")
        out = []
        for c, entry in enumerate(spec.per_cohort):
            if isinstance(entry, dict):
                d = {}
                for a, b in entry.items():
                    if not a.isdigit() or not 0 <= int(a) < game.n:
                        raise FormatError(f"field perCohort.{c}: unknown action {a!r}")
                    d[int(a)] = _belief(b, game.n, f"perCohort.{c}.{a}")
                out.append(d)
            else:
                b = _belief(entry, game.n, f"perCohort.{c}")
                out.append({a: b for a in range(game.n)})
        return CohortBeliefs(tuple(out))
    except (tl.TailError, ValueError, TypeError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def _affine(spec: AffineSpec) -> tl.AffineBelief:
    return tl.AffineBelief(to_fraction(spec.alpha), to_fraction(spec.gamma), spec.threshold)


def _belief(values, n: int, where: str):
    if len(values) != n:
        raise FormatError(f"field {where}: belief has {len(values)} entries, game has {n} actions")
    try:
        return sx.simplex_point(values)
    except sx.SimplexError as exc:
        raise FormatError(f"field {where}: {exc}") from None


def read_beliefs(game, path):
    return beliefs_from_dict(game, _load_json(path), path)


# --------------------------------------------------------------------------- writing


def profile_to_dict(profile) -> dict:
    if isinstance(profile, tl.TailProfile):
        return {"schema": PROFILE_SCHEMA, "base": list(profile.base), "exceptions": [list(e) for e in profile.exceptions]}
    return {"schema": PROFILE_SCHEMA, "base": profile.y.tolist()}


def beliefs_to_dict(beliefs) -> dict:
    if isinstance(beliefs, tl.TailBeliefs):
        return {"schema": BELIEFS_SCHEMA, "affine": {
            str(a): {"alpha": b.alpha, "gamma": b.gamma, "threshold": b.threshold}
            for a, b in sorted(beliefs.per_action.items())
        }}
    return {"schema": BELIEFS_SCHEMA, "perCohort": [
        {str(a): np.asarray(b).tolist() for a, b in sorted(d.items())} for d in beliefs.beliefs
    ]}


def _number(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    text = format(x, ".17g")
    if x == int(x) and abs(x) < 1e17 and "e" not in text:
        return text + ".0"
    return text


def _encode(obj, indent: int, level: int) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, Fraction):
        return json.dumps(fraction_str(obj))
    if isinstance(obj, (float, np.floating)):
        return _number(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if hasattr(obj, "as_dict"):
        obj = obj.as_dict()
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted((str(k), v) for k, v in obj.items())
        body = ("," + pad).join(f"{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in items)
        return "{" + pad + body + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[" + pad + ("," + pad).join(_encode(v, indent, level + 1) for v in obj) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Canonical JSON text: sorted keys, 17 significant digits, rationals as strings."""
    return _encode(obj, indent, 0) + "\n"


def report(kind: str, body: dict) -> dict:
    out = dict(body)
    out["schema"] = REPORT_SCHEMA
    out["kind"] = kind
    return out


def write_json(obj, path) -> None:
    Path(path).write_text(dumps(obj))


# --------------------------------------------------------------------------- schema files


REPORT_JSON_SCHEMA = {
    "title": "Report",
    "type": "object",
    "required": ["schema", "kind"],
    "properties": {
        "schema": {"const": REPORT_SCHEMA},
        "kind": {"enum": ["solve", "verify", "examples", "check"]},
        "verdict": {"enum": ["pass", "fail"]},
        "measureOfPassSet": {"type": "string", "description": "exact rational p/q"},
    },
    "additionalProperties": True,
    "description": "Keys are sorted; floats carry 17 significant digits; rationals are p/q strings; "
                   "non-finite floats are the strings NaN, Infinity, -Infinity.",
}


def json_schemas() -> dict[str, dict]:
    game = {
        "title": "Game",
        "oneOf": [CohortGameSpec.model_json_schema(by_alias=True), TailGameSpec.model_json_schema(by_alias=True)],
    }
    return {
        "game.schema.json": game,
        "profile.schema.json": ProfileSpec.model_json_schema(by_alias=True),
        "beliefs.schema.json": BeliefsSpec.model_json_schema(by_alias=True),
        "report.schema.json": REPORT_JSON_SCHEMA,
    }


def write_schemas(directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name, schema in json_schemas().items():
        path = directory / name
        path.write_text(json.dumps(schema, indent=2, sort_keys=True) + "\n")
        out.append(path)
    return out
