import json
import shutil
import subprocess

import pytest

from hqslab.cli import main
from hqslab.scenarios import data_dir


def test_check_report(capsys):
    assert main(["check", "running-example"]) == 0
    out = capsys.readouterr().out
    assert "quorum intersection: true" in out
    assert "weakly available set: {1,3,4}" in out
    assert "strongly available set: {3,4}" in out
    assert "{1,4}: not subsuming (member 4)" in out
    assert "{3,4}: subsuming, complete" in out
    assert "quorum sharing: false (witness {1,4})" in out
    assert "sink component: {1,3,4}" in out


def test_check_slice_file(capsys):
    assert main(["check", "fbqs-discussion"]) == 0
    out = capsys.readouterr().out
    assert "Q(1) = {{1,2,4}, {1,2,5}}" in out and "strongly available set: {1,2,5}" in out


def test_graph_dot(capsys, tmp_path):
    assert main(["graph", "fbqs-discussion"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("digraph") and "2 -> 5;" in out and '3 [style=filled' in out
    dst = tmp_path / "g.dot"
    assert main(["graph", "fbqs-discussion", "-o", str(dst)]) == 0
    assert dst.read_text() == out


def test_run_and_replay(capsys, tmp_path):
    tr = tmp_path / "t.jsonl"
    assert main(["run", "bracha-blocking", "--trace-out", str(tr)]) == 0
    assert capsys.readouterr().out.rstrip().endswith("PASS")
    lines = tr.read_text().splitlines()
    assert json.loads(lines[-1])["kind"] == "end"
    assert main(["replay", "bracha-blocking", str(tr)]) == 0
    assert "replay identical" in capsys.readouterr().out
    # a trace from another scenario does not replay here
    other = tmp_path / "o.jsonl"
    assert main(["run", "hardlock", "--trace-out", str(other)]) == 0
    assert main(["replay", "bracha-blocking", str(other)]) == 1


def test_variant_traces_are_written(tmp_path):
    tr = tmp_path / "lm.jsonl"
    assert main(["run", "last-minute-attack", "--trace-out", str(tr)]) == 0
    assert (tmp_path / "lm.delta0.jsonl").is_file() and (tmp_path / "lm.delta3.jsonl").is_file()


def test_expectation_failure_exit_codes(tmp_path, capsys):
    src = json.loads((data_dir() / "scenarios" / "bracha-blocking.json").read_text())
    src["expect"] = {"delivered": {"1": "m1"}}
    shutil.copy(data_dir() / "systems" / "bracha-blocking.json", tmp_path / "bracha-blocking.json")
    f = tmp_path / "bad.json"
    f.write_text(json.dumps(src))
    assert main(["run", str(f)]) == 1
    assert "FAIL delivered[1]" in capsys.readouterr().out
    assert main(["run", str(f), "--expect-fail"]) == 0
    assert main(["run", "bracha-blocking", "--expect-fail"]) == 1


def test_input_errors(tmp_path, capsys):
    assert main(["check", "no-such-system"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{ nope")
    assert main(["check", str(bad)]) == 2
    assert "line 1" in capsys.readouterr().err
    assert main(["run", str(bad)]) == 2
    assert main(["replay", "bracha-blocking", str(tmp_path / "missing.jsonl")]) == 2
    garbage = tmp_path / "g.jsonl"
    garbage.write_text("[1, 2]\n")
    assert main(["replay", "bracha-blocking", str(garbage)]) == 2
    wb_inject = tmp_path / "inj.json"
    wb_inject.write_text(json.dumps({"format": 1, "system": "running-example", "protocol": "brb", "sender": 1,
                                     "adversary": [{"op": "inject", "from": 1, "to": [3], "at": 0,
                                                    "msgs": [{"kind": "BCAST", "val": "x"}]}]}))
    assert main(["run", str(wb_inject)]) == 2
    with pytest.raises(SystemExit):
        main(["run"])


def test_suite_verb(capsys, tmp_path):
    assert main(["suite", "--only", "brb", "--only", "minimal-quorums", "--count", "6", "--trace-out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "brb-fv: 6 runs" in out and "minimal-quorums: 6 runs" in out
    assert len(list(tmp_path.glob("brb-*.jsonl"))) == 6


def test_console_script():
    exe = shutil.which("hqslab")
    if exe is None:
        pytest.skip("console script not installed")
    p = subprocess.run([exe, "check", "triangle"], capture_output=True, text=True)
    assert p.returncode == 0 and "quorum intersection: true" in p.stdout
