import json
from pathlib import Path

import pytest

from mpec_kit.cli import AnalysisReport, emit_report, main, parse_vector, run

INST = Path(__file__).resolve().parent.parent / "instances"


def q(name):
    return str(INST / f"{name}.json")


def run_json(*argv):
    code, out = run([*argv, "--format", "json"])
    return code, json.loads(out)


def test_stationarity_q7_all_partitions():
    code, doc = run_json("stationarity", q("q7"), "--point", "0,0,0", "--all-partitions")
    assert code == 0
    pd = doc["sections"]["primal_dual"]
    assert pd["verdict"] == "stationary" and len(pd["systems"]) == 4
    assert all(s["feasible"] and "certificate" in s for s in pd["systems"])
    ncp = {tuple(s["beta_1"]): s for s in doc["sections"]["ncp_systems"]}
    assert ncp[(1,)]["pi"] == ["1", "0"]


def test_multipliers_q4():
    code, doc = run_json("multipliers", q("q4"), "--point", "2,0,1,0")
    sec = doc["sections"]["multipliers"]
    assert code == 0
    assert sorted(sec["extreme_points"]) == [["0", "1"], ["1/2", "0"]]
    assert sec["smfcq"] == "fails"


def test_cones_q6():
    code, doc = run_json("cones", q("q6"), "--point", "0,0")
    assert code == 0
    T = doc["sections"]["tangent_cone"]["pieces"]
    assert len(T) == 1 and T[0]["rays"] == [["1", "0"]] and T[0]["lineality"] == []
    L = doc["sections"]["linearized_cone"]["pieces"]
    assert len(L) == 1 and sorted(L[0]["rays"]) == [["0", "1"], ["1", "0"]]
    assert doc["sections"]["cq"]["verdict"] == "fails" and doc["sections"]["cq"]["witness"] == ["0", "1"]


def test_list_multipliers(tmp_path):
    f = tmp_path / "lams.json"
    f.write_text(json.dumps([[0]]))
    code, doc = run_json("cones", q("q6"), "--point", "0,0", "--multipliers", f"list:{f}")
    assert code == 0
    assert doc["sections"]["linearized_cone"]["multipliers"] == [["0"]]


def test_critical_q5():
    code, doc = run_json("critical", q("q5"), "--point", "2,0,1,0", "--dx", "3,-1/2", "--lambda", "1/2,0")
    assert code == 0
    dcs = doc["sections"]["directional_critical_sets"][0]["directional_critical_set"]
    assert dcs["equalities"] == [{"a": ["2", "0"], "b": "0"}]
    assert doc["sections"]["dual_critical_lp"]["value"] == "0"


def test_empty_multiplier_line():
    code, out = run(["multipliers", q("q9"), "--point", "0,0,0,0"])
    assert code == 0 and "M(z) = ∅" in out
    code, out = run(["stationarity", q("q9"), "--point", "0,0,0,0"])
    assert "M(z) = ∅" in out


def test_heuristic_status_and_exit_code():
    code, doc = run_json("cones", q("q4"), "--point", "2,0,1,0")
    assert code == 2 and doc["status"] == "heuristic"
    assert doc["sections"]["tangent_cone"]["status"] == "heuristic"


def test_kkt_reformulate_document():
    code, doc = run_json("kkt-reformulate", q("q1"), "--point", "1,0,0")
    nlp = doc["sections"]["nlp"]
    assert [e["expr"] for e in nlp["equalities"]] == ["y1 - y2", "-y1*y2"]
    assert doc["sections"]["nlp_basic_cq"]["verdict"] == "fails"


def test_cross_check():
    for seed, profile in [(1, "ncp-small"), (2, "vi-small"), (3, "polyhedral-z")]:
        code, doc = run_json("cross-check", "--random", str(seed), "--profile", profile)
        assert code == 0 and doc["sections"]["cross_check"]["agree"]
    code, doc = run_json("cross-check", q("q4"), "--point", "2,0,1,0")
    assert code == 0 and doc["sections"]["cross_check"]["checks"] > 0


def test_json_is_deterministic():
    a = run(["cones", q("q2"), "--point", "0,0,0", "--sample", "--format", "json"])
    b = run(["cones", q("q2"), "--point", "0,0,0", "--sample", "--format", "json"])
    assert a == b


def test_no_decimals_in_exact_output():
    _, out = run(["critical", q("q5"), "--point", "2,0,1,0", "--dx", "0.25,-1/2", "--format", "json"])
    doc = json.loads(out)
    assert doc["sections"]["dx"] == ["1/4", "-1/2"]


@pytest.mark.parametrize("cmd", [
    ["multipliers", "q4", "--point", "2,0,1,0"],
    ["stationarity", "q7", "--point", "0,0,0", "--all-partitions"],
    ["cones", "q6", "--point", "0,0"],
])
def test_report_round_trip(cmd):
    argv = [cmd[0], q(cmd[1]), *cmd[2:]]
    _, out = run([*argv, "--format", "json"])
    doc = json.loads(out)
    rep = AnalysisReport.from_json(doc)
    assert json.loads(emit_report(rep, "json")) == doc
    text = emit_report(rep, "text")
    _, direct_text = run(argv)
    assert text == direct_text

    def leaves(node):
        if isinstance(node, dict):
            for v in node.values():
                yield from leaves(v)
        elif isinstance(node, list):
            for v in node:
                yield from leaves(v)
        elif isinstance(node, str):
            yield node

    for leaf in leaves(doc["sections"]):
        assert leaf in text


def test_errors_exit_one(tmp_path, capsys):
    assert main(["check", str(tmp_path / "missing.json"), "--point", "0"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 1, "m": 1, "l": 2, "f": "0", "F": ["y1"], "g": ["-y1"]}))
    assert main(["check", str(bad), "--point", "0,0"]) == 1
    assert main(["check", q("q4"), "--point", "1,2"]) == 1
    assert main(["critical", q("q4"), "--point", "2,0,1,0"]) == 1  # --dx missing
    assert main(["nonsense"]) == 1
    assert main(["cones", q("q6"), "--point", "0,0", "--multipliers", "all"]) == 1
    err = capsys.readouterr().err
    assert "l=2" in err or "expected" in err


def test_invalid_multiplier_list_is_an_error(tmp_path):
    f = tmp_path / "lams.json"
    f.write_text(json.dumps([["1/2"]]))
    assert main(["cones", q("q6"), "--point", "0,0", "--multipliers", f"list:{f}"]) == 1


def test_parse_vector():
    assert parse_vector("1, -1/2 ,0.25") == (1, -0.5, 0.25)
