import json
import random

import pytest

from scenario_gen import random_scenario_dict
from sapiens_sim.errors import ScenarioParseError, ScenarioValidationError
from sapiens_sim.scenario import bundled_scenario, load_scenario, parse_scenario, scenario_to_dict


def _minimal():
    return json.loads(bundled_scenario("minimal").read_text())


def test_bundled_scenarios_load():
    for name in ("minimal", "risk_distribution", "vuln_counts", "economy"):
        s = load_scenario(bundled_scenario(name))
        assert s.name == name
    with pytest.raises(FileNotFoundError):
        bundled_scenario("nope")


def test_json_error_has_line_and_column(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "schema": 1,\n  "nodes": [,]\n}')
    with pytest.raises(ScenarioParseError, match=r"bad.json:3:\d+"):
        load_scenario(p)


@pytest.mark.parametrize(
    "patch,match",
    [
        (lambda d: d.pop("nodes"), r"\$\.nodes: missing"),
        (lambda d: d.update(schema=2), "unsupported version"),
        (lambda d: d["params"].update(quorum="3"), r"\$\.params\.quorum"),
        (lambda d: d["params"].update(bogus=1), "unknown field"),
        (lambda d: d["nodes"][1].update(roles=["Wizard"]), r"\$\.nodes\[1\]\.roles"),
        (lambda d: d["tasks"][0].update(type="Phone"), r"\$\.tasks\[0\]\.type"),
        (lambda d: d["tasks"][0]["targets"][0]["planted"][0].update(detectability=2.0), "detectability"),
        (lambda d: d["nodes"][1].update(position=[1]), "position"),
    ],
)
def test_parse_errors_name_the_field(patch, match):
    d = _minimal()
    patch(d)
    with pytest.raises(ScenarioParseError, match=match):
        parse_scenario(d)


@pytest.mark.parametrize(
    "patch,match",
    [
        (lambda d: d["params"].update(quorum=2), "quorum must be a positive odd"),
        (lambda d: d["tasks"][0].update(user="ghost"), "unknown node ghost"),
        (lambda d: d["nodes"].append({"id": "alice"}), "duplicate node id alice"),
        (lambda d: d["nodes"].append({"id": "x", "roles": ["POCA"]}), "POCA requires POCD"),
        (lambda d: d["nodes"].pop(0), "needs at least one fog"),
        (lambda d: d["tasks"][0].update(user="cro-a"), "does not hold the User role"),
        (lambda d: d["params"].update(w_pow=0.9), "sum to 1"),
        (lambda d: d["pocs"][0].update(verdicts=["Accept", "Accept"]), "2 verdicts for quorum 1"),
        (lambda d: d["tasks"][0]["targets"][0].update(type="SmartContract"), "is not a Website"),
        (lambda d: d["nodes"][2].update(capacity=0), "capacity must be > 0"),
    ],
)
def test_validation_errors_name_the_invariant(patch, match):
    d = _minimal()
    patch(d)
    with pytest.raises(ScenarioValidationError, match=match):
        parse_scenario(d)


def test_round_trip_through_dict():
    for seed in range(20):
        d = random_scenario_dict(random.Random(seed))
        s = parse_scenario(d)
        again = parse_scenario(json.loads(json.dumps(scenario_to_dict(s))))
        assert scenario_to_dict(again) == scenario_to_dict(s)
