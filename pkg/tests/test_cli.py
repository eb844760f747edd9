import csv
import io
import json
import subprocess
import sys
from fractions import Fraction

import pytest

from omegaforge.cli import CONCORDANCE, main, parse_schedule, CliError


def write(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


CLOSURE_OF_ONE = {
    "construction": "tot-from-sigma2",
    "params": {"set": {"kind": "toy-known-limit", "events": [["1", 0]]}},
}


def build(tmp_path, cfg, name="m.json"):
    cfg_path = write(tmp_path / ("cfg-" + name), cfg)
    out = tmp_path / name
    assert main(["build", "--config", cfg_path, "--out", str(out)]) == 0
    return str(out)


def read_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def bound(row, side):
    return Fraction(int(row[f"{side}_num"]), 2 ** int(row[f"{side}_exp"]))


def test_build_and_trace_closure_of_one(tmp_path, capsys):
    art = build(tmp_path, CLOSURE_OF_ONE)
    capsys.readouterr()
    assert main(["trace", art, "--tag", "TOT", "--depth", "3", "--stage", "10", "--nmax", "3"]) == 0
    (row,) = read_rows(capsys.readouterr().out)
    assert bound(row, "lower") == bound(row, "upper") == Fraction(1, 2)
    assert row["lower_certified"] == row["upper_certified"] == "1"


def test_build_is_byte_identical(tmp_path):
    a = build(tmp_path, CLOSURE_OF_ONE, "a.json")
    b = build(tmp_path, CLOSURE_OF_ONE, "b.json")
    assert open(a, "rb").read() == open(b, "rb").read()


def test_build_kraft_violation_exits_3(tmp_path, capsys):
    cfg = {"construction": "tot-from-sigma2",
           "params": {"set": {"kind": "kraft-chaitin", "requests": [[1, 0], [1, 1], [1, 2]]}}}
    assert main(["build", "--config", write(tmp_path / "c.json", cfg)]) == 3
    assert "request 2" in capsys.readouterr().err


def test_build_schema_violation_exits_2(tmp_path):
    cfg = {"construction": "tot-from-sigma2", "params": {"set": {"kind": "toy-known-limit"}}, "bogus": 1}
    assert main(["build", "--config", write(tmp_path / "c.json", cfg)]) == 2
    cfg = {"construction": "prescribed-tot", "params": {"target": {"values": ["1/2"], "c": 2}, "extra": 3}}
    assert main(["build", "--config", write(tmp_path / "d.json", cfg)]) == 2


def test_build_headroom_exits_3(tmp_path):
    cfg = {"construction": "prescribed-tot", "params": {"target": {"values": ["7/8"], "c": 2}}}
    assert main(["build", "--config", write(tmp_path / "c.json", cfg)]) == 3


def test_config_precedence(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    write(tmp_path / "omegaforge.json", {"construction": "empty"})
    write(tmp_path / "env.json", {"construction": "empty", "params": {"frozen_from": 7}})
    write(tmp_path / "flag.json", {"construction": "empty", "params": {"frozen_from": 9}})

    def built():
        return json.loads(capsys.readouterr().out)["machine"]["params"].get("frozen_from")

    monkeypatch.delenv("OMEGA_FORGE_CONFIG", raising=False)
    assert main(["build"]) == 0 and built() is None
    monkeypatch.setenv("OMEGA_FORGE_CONFIG", "env.json")
    assert main(["build"]) == 0 and built() == 7
    assert main(["build", "--config", "flag.json"]) == 0 and built() == 9


def test_missing_config_exits_2(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("OMEGA_FORGE_CONFIG", raising=False)
    assert main(["build"]) == 2


def test_config_output_key(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    write(tmp_path / "c.json", {"construction": "empty", "output": "art.json"})
    assert main(["build", "--config", "c.json"]) == 0
    assert json.loads((tmp_path / "art.json").read_text())["format"] == "omegaforge-machine/1"


def test_trace_empty_machine_rows_are_constant(tmp_path, capsys):
    art = build(tmp_path, {"construction": "empty"})
    capsys.readouterr()
    assert main(["trace", art, "--tag", "TOT", "--schedule", "2:1:2,2:3:2,3:5:3"]) == 0
    rows = read_rows(capsys.readouterr().out)
    assert {(bound(r, "lower"), bound(r, "upper")) for r in rows} == {(0, 0)}


def test_trace_prescribed_half_ends_at_half(tmp_path, capsys):
    art = build(tmp_path, {"construction": "prescribed-tot",
                           "params": {"target": {"values": ["3/4", "5/8", "1/2"], "c": 3}}})
    capsys.readouterr()
    out = tmp_path / "t.csv"
    assert main(["trace", art, "--tag", "TOT", "--schedule", "4:0:4,4:1:4,4:2:4,4:3:4",
                 "--out", str(out), "--jobs", "2"]) == 0
    rows = read_rows(out.read_text())
    assert bound(rows[-1], "upper") == Fraction(1, 2)
    assert [bound(r, "upper") for r in rows] == sorted((bound(r, "upper") for r in rows), reverse=True)


def test_trace_inapplicable_tag_exits_3(tmp_path):
    art = build(tmp_path, CLOSURE_OF_ONE)
    assert main(["trace", art, "--tag", "DOM-infsd"]) == 3
    assert main(["trace", art, "--tag", "NOT-A-TAG"]) == 3


def test_trace_bad_schedule(tmp_path):
    art = build(tmp_path, CLOSURE_OF_ONE)
    assert main(["trace", art, "--tag", "TOT", "--schedule", "3:5"]) == 2
    assert main(["trace", art, "--tag", "TOT", "--schedule", "3:5:3,3:4:3"]) == 3


def test_malformed_machine_file_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["trace", str(bad), "--tag", "TOT"]) == 2
    bad.write_text(json.dumps({"format": "other"}))
    assert main(["trace", str(bad), "--tag", "TOT"]) == 2
    assert main(["verify-machine", str(tmp_path / "missing.json")]) == 2


def test_heuristic_trace_flags(tmp_path, capsys):
    art = build(tmp_path, CLOSURE_OF_ONE)
    capsys.readouterr()
    assert main(["trace", art, "--tag", "TOT", "--heuristic", "--depth", "3", "--stage", "10", "--nmax", "3"]) == 0
    (row,) = read_rows(capsys.readouterr().out)
    assert row["lower_certified"] == row["upper_certified"] == "0"


def test_mltest_pass(tmp_path, capsys):
    doc = {"S": ["0", "10", "110"], "V": ["10", "0"], "levels": 5}
    assert main(["mltest", write(tmp_path / "in.json", doc)]) == 0
    out = capsys.readouterr().out
    assert out.strip().endswith("PASS")
    assert out.count("slack=") == 5


def test_mltest_adversarial_fails(tmp_path, capsys):
    S = ["000", "001", "010", "011", "100", "101", "110", "111"]
    doc = {"S": S, "V": S[:5], "levels": 1, "margins": {"1": "1/4"},
           "delta_overrides": {"1": "1/10"}, "check_preconditions": False}
    assert main(["mltest", write(tmp_path / "in.json", doc)]) == 4
    assert "FAIL at n=1" in capsys.readouterr().out


def test_mltest_empty_v(tmp_path, capsys):
    doc = {"S": ["0", "1"], "V": [], "levels": 3}
    assert main(["mltest", write(tmp_path / "in.json", doc)]) == 0
    lines = capsys.readouterr().out.splitlines()
    for n, line in zip(range(1, 4), lines):
        assert f"n={n} pass" in line


def test_mltest_schema_and_precondition_errors(tmp_path):
    assert main(["mltest", write(tmp_path / "a.json", {"S": ["0"]})]) == 2
    assert main(["mltest", write(tmp_path / "b.json", {"S": ["0", "01"], "V": []})]) == 3


def test_verify_machine_ok_and_models(tmp_path, capsys):
    for cfg in [CLOSURE_OF_ONE,
                {"construction": "monotone-from-tot", "params": CLOSURE_OF_ONE["params"]},
                {"construction": "infsd-from-sigma2", "params": CLOSURE_OF_ONE["params"]},
                {"construction": "cof-from-sigma3", "params": {"family": {"infinite": [["0", 0, 1]]},
                                                               "oracle": {"kind": "empty"}}}]:
        art = build(tmp_path, cfg, cfg["construction"] + ".json")
        assert main(["verify-machine", art, "--depth", "3", "--stage", "6", "--nmax", "6"]) == 0
    assert "OK:" in capsys.readouterr().out


def test_splice_conflict_exits_3(tmp_path):
    cfg = {"construction": "splice", "params": {
        "v": {"construction": "empty"},
        "n": {"construction": "constant-on-region", "params": {"region": ["1"]}},
        "rho": "1"}}
    assert main(["build", "--config", write(tmp_path / "c.json", cfg)]) == 3


def test_concordance_uses_descriptive_names(capsys):
    assert main(["concordance"]) == 0
    out = capsys.readouterr().out
    assert len(out.splitlines()) == len(CONCORDANCE) + 2
    commands = ("build", "trace", "mltest", "verify-machine")
    assert all(any(c in row for c in commands) for _, row in CONCORDANCE)


def test_parse_schedule():
    assert parse_schedule("1:2:3, 4:5:6") == [(1, 2, 3), (4, 5, 6)]
    with pytest.raises(CliError):
        parse_schedule("")
    with pytest.raises(CliError):
        parse_schedule("a:b:c")


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "omegaforge.cli", "concordance"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "mltest" in res.stdout
