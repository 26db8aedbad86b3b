import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from nonatomic_eq import formats as fm
from nonatomic_eq import tail as tl
from nonatomic_eq.equilibrium import verify_estimated
from nonatomic_eq.game import Misspecified, Neighborhood
from nonatomic_eq.solver import solve_estimated

ROOT = Path(__file__).resolve().parents[1]
SAMPLES = ROOT / "samples"


def test_sample_games_load():
    g = fm.read_game(SAMPLES / "two_groups.json")
    assert g.n == 3 and g.m == 2 and g.cohorts[0].mass == Fraction(1, 2)
    assert isinstance(g.cohorts[0].feedback, Misspecified) and isinstance(g.cohorts[1].feedback, Neighborhood)
    t = fm.read_game(SAMPLES / "kpqs.json")
    assert isinstance(t, tl.TailGame) and t.feedback == "payoff"
    assert fm.game_from_dict({"tailFamily": "alnajjar"}).feedback == "none"


def test_tail_profile_and_beliefs():
    g = fm.read_game(SAMPLES / "kpqs.json")
    prof = fm.read_profile(g, SAMPLES / "kpqs_profile.json")
    assert prof.share == 0 and prof.exceptions == ((1, 0), (2, 0))
    b = fm.read_beliefs(g, SAMPLES / "kpqs_beliefs.json")
    assert b.belief(1).alpha == Fraction(1, 20) and b.belief(1).threshold == 11
    shared = fm.beliefs_from_dict(g, {"affine": {"alpha": "1/2"}})
    assert shared.belief(0).alpha == Fraction(1, 2)


def test_round_trip_reverifies_identically(tmp_path):
    g = fm.read_game(SAMPLES / "two_groups.json")
    res = solve_estimated(g, 0.05)
    fm.write_json(fm.profile_to_dict(res.profile), tmp_path / "p.json")
    fm.write_json(fm.beliefs_to_dict(res.beliefs), tmp_path / "b.json")
    prof = fm.read_profile(g, tmp_path / "p.json")
    beliefs = fm.read_beliefs(g, tmp_path / "b.json")
    assert np.array_equal(prof.y, res.profile.y)
    again = verify_estimated(g, prof, beliefs, 0.05)
    assert fm.dumps(again.as_dict()) == fm.dumps(res.verified.as_dict())


def test_tail_round_trip(tmp_path):
    p = tl.TailProfile((Fraction(1, 3), Fraction(2, 3)), ((5, 1),))
    b = tl.TailBeliefs({0: tl.AffineBelief(Fraction(1, 7), Fraction(2, 5), 4)})
    g = tl.TailGame("kpqs", "payoff")
    fm.write_json(fm.profile_to_dict(p), tmp_path / "p.json")
    fm.write_json(fm.beliefs_to_dict(b), tmp_path / "b.json")
    assert fm.read_profile(g, tmp_path / "p.json") == p
    assert fm.read_beliefs(g, tmp_path / "b.json").belief(0) == b.belief(0)


def test_canonical_numbers():
    text = fm.dumps({"b": 0.1, "a": Fraction(3, 4), "c": [1.0, float("nan"), float("inf"), -float("inf")], "d": 2})
    assert text.index('"a"') < text.index('"b"')
    assert '"3/4"' in text and "0.10000000000000001" in text
    assert '[1.0, "NaN", "Infinity", "-Infinity"]' in text
    assert float(json.loads(text)["b"]) == 0.1
    assert fm.report("verify", {})["schema"] == fm.REPORT_SCHEMA


def test_rationals_accept_strings_and_decimals():
    data = json.loads((SAMPLES / "congestion.json").read_text())
    data["cover"][0]["mass"] = "1.0"
    data["cohorts"][0]["mass"] = 1
    data["cohorts"][0]["cells"][0]["mass"] = "2/2"
    assert fm.game_from_dict(data).cohorts[0].mass == 1


def test_malformed_json_reports_line_and_column(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "actions": 2,\n  "cover": [\n}')
    with pytest.raises(fm.FormatError, match=r"line 4 column 1"):
        fm.read_game(path)
    with pytest.raises(fm.FormatError, match="No such file"):
        fm.read_game(tmp_path / "missing.json")


def test_field_diagnostics():
    data = json.loads((SAMPLES / "congestion.json").read_text())
    bad = json.loads(json.dumps(data))
    bad["cohorts"][0]["utility"]["table"] = [[0.0, 2.0], [1.0, 0.0]]
    with pytest.raises(fm.FormatError, match=r"field cohorts\.0"):
        fm.game_from_dict(bad)
    bad = json.loads(json.dumps(data))
    bad["cohorts"][0]["mass"] = "one"
    with pytest.raises(fm.FormatError, match=r"field cohorts\.0\.mass"):
        fm.game_from_dict(bad)
    bad = json.loads(json.dumps(data))
    bad["cohorts"][0]["feedback"] = {"kind": "telepathy"}
    with pytest.raises(fm.FormatError, match=r"cohorts\.0\.feedback"):
        fm.game_from_dict(bad)
    bad = json.loads(json.dumps(data))
    bad["cover"][0]["mass"] = "1/2"
    with pytest.raises(fm.FormatError):
        fm.game_from_dict(bad)
    bad = json.loads(json.dumps(data))
    bad["extra"] = 1
    with pytest.raises(fm.FormatError, match="extra"):
        fm.game_from_dict(bad)


def test_profile_and_belief_diagnostics():
    g = fm.read_game(SAMPLES / "congestion.json")
    with pytest.raises(fm.FormatError, match="field base"):
        fm.profile_from_dict(g, {"base": [0.7, 0.7]})
    with pytest.raises(fm.FormatError, match="tail games"):
        fm.profile_from_dict(g, {"base": [0.5, 0.5], "exceptions": [[1, 0]]})
    with pytest.raises(fm.FormatError, match="perCohort"):
        fm.beliefs_from_dict(g, {"perCohort": [[0.5, 0.5], [0.5, 0.5]]})
    with pytest.raises(fm.FormatError, match=r"perCohort\.0"):
        fm.beliefs_from_dict(g, {"perCohort": [[0.5, 0.3, 0.2]]})
    with pytest.raises(fm.FormatError, match="unknown action"):
        fm.beliefs_from_dict(g, {"perCohort": [{"7": [0.5, 0.5]}]})
    t = fm.read_game(SAMPLES / "kpqs.json")
    with pytest.raises(fm.FormatError):
        fm.beliefs_from_dict(t, {"affine": {"2": {"alpha": 0}}})
    with pytest.raises(fm.FormatError):
        fm.profile_from_dict(t, {"base": [[0.5, 0.5]]})


def test_schema_files_are_current():
    for name, schema in fm.json_schemas().items():
        on_disk = json.loads((ROOT / "schemas" / name).read_text())
        assert on_disk == json.loads(json.dumps(schema)), name
