import json

import pytest

from sdpfit.cli import fmt, main
from sdpfit.model import instance_to_json, scheduling_instance


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def files(tmp_path, two_by_two, one_machine):
    return {
        "split": write(tmp_path / "split.json", instance_to_json(two_by_two)),
        "single": write(tmp_path / "single.json", instance_to_json(one_machine)),
        "ne": write(tmp_path / "ne.json", {"x": {"j1": 0, "j2": 1}}),
        "stacked": write(tmp_path / "stacked.json", {"x": {"j1": 0, "j2": 0}}),
        "both": write(tmp_path / "both.json", {"x": {"j1": 0, "j2": 0}}),
    }


def run(capsys, *argv):
    code = main(list(argv) + ["--json"])
    return code, json.loads(capsys.readouterr().out)


def test_ids_match_fixture(two_by_two):
    assert [p.id for p in two_by_two.players] == ["j1", "j2"]


def test_verify_dual_smith(capsys, files):
    code, out = run(capsys, "verify-dual", "--scenario", "smith", "--instance", files["split"], "--assignment", files["ne"])
    assert code == 0 and out["pass"] and out["ratio"] == pytest.approx(0.375)


def test_eval_ps(capsys, files):
    code, out = run(capsys, "eval", "--mechanism", "ps", "--instance", files["single"], "--assignment", files["both"])
    assert code == 0 and out["social"] == 5


@pytest.mark.parametrize("mech, cost", [("smith", 4), ("rand", 13 / 3)])
def test_eval_mechanisms(capsys, files, mech, cost):
    _, out = run(capsys, "eval", "--mechanism", mech, "--instance", files["single"], "--assignment", files["both"])
    assert out["social"] == pytest.approx(cost, rel=1e-11)


def test_check_ne_failure_exit_two(capsys, files):
    code, out = run(capsys, "check-ne", "--instance", files["split"], "--assignment", files["stacked"])
    assert code == 2


def test_missing_file_io_error(capsys, tmp_path):
    code, out = run(capsys, "eval", "--instance", str(tmp_path / "absent.json"), "--assignment", str(tmp_path / "a.json"))
    assert code == 1 and out["error"]["kind"] == "io"


def test_bad_instance_input_error(capsys, tmp_path, files):
    bad = write(tmp_path / "bad.json", {"resources": ["a"], "players": [{"id": "p", "weight": -1, "strategies": [["a"]], "processing": {"a": 1}}]})
    code, out = run(capsys, "eval", "--instance", bad, "--assignment", files["ne"])
    assert code == 1 and out["error"]["kind"] == "input"


def test_usage_error(capsys):
    assert main(["verify-dual"]) == 1
    assert main(["eval", "--tol", "-1"]) == 1


def test_kk_needs_params(capsys):
    code, out = run(capsys, "verify-dual", "--scenario", "kk-high")
    assert code == 1 and out["error"]["kind"] == "usage"


def test_kk_verify(capsys):
    code, out = run(capsys, "verify-dual", "--scenario", "kk-high", "--kk", "2,1,2,0.01")
    assert code == 0 and out["dualObjective"] == pytest.approx(6.0)


def test_search_commands(capsys, files):
    for cmd in ("jumpopt", "localsearch", "greedy", "br"):
        code, out = run(capsys, cmd, "--instance", files["split"])
        assert code == 0 and out["social"] == pytest.approx(2.0)


def test_greedy_all_orders(capsys, files):
    code, out = run(capsys, "greedy", "--all-orders", "--instance", files["single"])
    assert code == 0 and out["orders"] == 2 and out["worstRatio"] <= 4


def test_greedy_order_unknown_player(capsys, files):
    code, out = run(capsys, "greedy", "--order", "j1,zz", "--instance", files["split"])
    assert code == 1 and out["error"]["kind"] == "input"


def test_oracle(capsys, files):
    code, out = run(capsys, "oracle", "--instance", files["single"])
    assert code == 0


def test_gen_lower_bound_roundtrip(capsys, tmp_path):
    prefix = str(tmp_path / "lb")
    code, out = run(capsys, "gen", "lower-bound", "--n", "3", "--out", prefix)
    assert code == 0
    inst, local = out["written"]["instance"], out["written"]["local"]
    code, rep = run(capsys, "verify-dual", "--scenario", "localsearch", "--instance", inst, "--assignment", local)
    assert code == 0 and rep["pass"]


def test_gen_random_deterministic(capsys):
    _, a = run(capsys, "gen", "random", "--seed", "5")
    _, b = run(capsys, "gen", "random", "--seed", "5")
    assert a == b


def test_cce_distribution(capsys, tmp_path, files):
    dist = write(tmp_path / "d.json", {"support": [{"x": {"j1": 0, "j2": 1}, "p": 0.5}, {"x": {"j1": 1, "j2": 0}, "p": 0.5}]})
    code, out = run(capsys, "verify-dual", "--scenario", "smith", "--instance", files["split"], "--distribution", dist)
    assert code == 0 and out["supportSize"] == 2


def test_suite_single_criterion(capsys):
    code, out = run(capsys, "suite", "--criteria", "1")
    assert code == 0 and out["pass"] and out["criteria"][0]["criterion"] == 1


def test_text_output(capsys, files):
    assert main(["eval", "--instance", files["single"], "--assignment", files["both"]]) == 0
    assert "social" in capsys.readouterr().out


def test_fmt_rounds():
    assert fmt({"a": [0.1 + 0.2]}) == {"a": [0.3]}
    assert fmt(True) is True
