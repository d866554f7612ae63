import json
from pathlib import Path

import numpy as np
import pytest

from fannet.cli import main
from fannet.fan import transition
from fannet.library import FIXTURES
from fannet.scenario import ParseError, ValidationError, dump_scenario, load_scenario, scenario_from_dict, scenario_to_dict

FIX = Path(__file__).resolve().parents[1] / "fixtures"


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fixture_files_match_library(name):
    assert load_scenario(FIX / f"{name}.json") == FIXTURES[name]()


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_round_trip(name):
    scn = FIXTURES[name]()
    doc = json.loads(dump_scenario(scn))
    again = scenario_from_dict(doc, name)
    assert again == scn
    assert scenario_to_dict(again) == doc


def test_loaded_fixture_simulates_like_library():
    scn = load_scenario(FIX / "three_trains.json")
    Y, S = transition(scn.fan, scn.fan.init_point(), scn.sim.t_max)
    assert np.allclose(S, (6.0, 12.0, 18.0), atol=1e-6)


def test_missing_term_guard_names_node():
    doc = json.loads((FIX / "three_trains.json").read_text())
    del doc["nodes"][1]["termGuard"]
    with pytest.raises(ValidationError, match=r"node 2.*termGuard"):
        scenario_from_dict(doc)


def test_unknown_node_in_predicate_rejected():
    doc = json.loads((FIX / "three_trains.json").read_text())
    doc["events"][0]["predicate"] = {"op": "lt", "node": 9, "value": 0.0}
    with pytest.raises(ValidationError):
        scenario_from_dict(doc)


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{ not json")
    with pytest.raises(ParseError):
        load_scenario(p)


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_cli_simulate_csv(capsys):
    code, out = _run(capsys, "simulate", FIX / "term_deadlock.json", "--t-max", "3")
    assert code == 0
    lines = out.out.splitlines()
    assert lines[0] == "t,x_1,x_2,x_3,activeClauses"


def test_cli_transition(capsys):
    code, out = _run(capsys, "transition", FIX / "three_trains.json")
    assert code == 0
    assert np.allclose(json.loads(out.out)["S"], [6.0, 12.0, 18.0], atol=1e-6)


def test_cli_gtransition_deadlock(capsys):
    code, _ = _run(capsys, "gtransition", FIX / "single_track.json", "--start-times", "0,3")
    assert code == 2


def test_cli_deadlock_scan_expect_regular(capsys, tmp_path):
    csv = tmp_path / "grid.csv"
    code, _ = _run(capsys, "deadlock-scan", FIX / "single_track.json", "--grid", "0,3", "--csv", csv, "--expect-regular")
    assert code == 3 and csv.exists()
    code, _ = _run(capsys, "deadlock-scan", FIX / "three_trains.json", "--grid", "0,1.5", "--expect-regular")
    assert code == 0


def test_cli_factorize_dot(capsys, tmp_path):
    dot = tmp_path / "g.dot"
    code, _ = _run(capsys, "factorize", FIX / "six_node.json", "--dot", dot)
    assert code == 0 and dot.read_text().count("rank=same") == 3


def test_cli_verify_modularization(capsys):
    code, _ = _run(capsys, "verify-modularization", FIX / "three_trains.json", "--samples", "5")
    assert code == 0


def test_cli_check_geometric(capsys):
    assert _run(capsys, "check-geometric", FIX / "three_trains.json", "--samples", "200")[0] == 0
    assert _run(capsys, "check-geometric", FIX / "term_deadlock.json", "--samples", "200")[0] == 2


def test_cli_core_and_stopped_write_scenarios(capsys, tmp_path):
    for cmd in ("core", "stopped"):
        out = tmp_path / f"{cmd}.json"
        assert _run(capsys, cmd, FIX / "three_trains.json", "-o", out)[0] == 0
        load_scenario(out)


def test_cli_concatenate_and_amalgamate_errors(capsys):
    assert _run(capsys, "amalgamate", FIX / "three_trains.json", FIX / "three_trains.json")[0] == 2
    assert _run(capsys, "concatenate", FIX / "three_trains.json", FIX / "three_trains.json")[0] == 2


def test_cli_usage_errors(capsys, tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["no-such-command"])
    assert err.value.code == 64
    bad = tmp_path / "bad.json"
    bad.write_text("[")
    assert _run(capsys, "transition", bad)[0] == 64
    doc = json.loads((FIX / "three_trains.json").read_text())
    del doc["nodes"][0]["initGuard"]
    bad.write_text(json.dumps(doc))
    code, out = _run(capsys, "transition", bad)
    assert code == 64 and "node 1" in out.err


def test_cli_output_is_deterministic(capsys):
    a = _run(capsys, "regularity-scan", FIX / "single_track.json", "--nt", "10", "--seed", "4")[1].out
    b = _run(capsys, "regularity-scan", FIX / "single_track.json", "--nt", "10", "--seed", "4")[1].out
    assert a == b and json.loads(a)
