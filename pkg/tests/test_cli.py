"""Command-line front end: scenarios, exit codes, sweeps, decode."""

import json
import os

import pytest

from prefixsim import cli, wire
from prefixsim.scenario import run_scenario, validate

SCENARIOS = os.path.join(os.path.dirname(cli.__file__), "scenarios")


def scenario_path(name):
    return os.path.join(SCENARIOS, name)


def test_shipped_faultfree_scenario_metrics(tmp_path, capsys):
    rc = cli.main([
        "--quiet", "run", "--scenario", scenario_path("pc3_faultfree_n4.json"),
        "--out", str(tmp_path),
    ])
    assert rc == 0
    doc = json.loads((tmp_path / "metrics.json").read_text())
    assert doc["outputs"]["0"]["low"]["time"] == "3"
    assert doc["network_messages"] == 36
    assert (tmp_path / "transcript.log").read_text()


def test_shipped_censor_scenario_passes(tmp_path):
    rc = cli.main([
        "--quiet", "run", "--scenario", scenario_path("msc_censor_f1.json"),
        "--out", str(tmp_path),
    ])
    assert rc == 0
    commits = (tmp_path / "commits.log").read_text().splitlines()
    # slot, index, origin, digest records for every committed payload
    assert commits and all(len(line.split("\t")) == 4 for line in commits)


def test_resilience_bound_rejected(tmp_path):
    bad = {"version": 1, "protocol": "pc3", "n": 3, "f": 1, "L": 3}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    rc = cli.main(["--quiet", "run", "--scenario", str(path)])
    assert rc == 2


def test_schema_error_names_field(tmp_path, capsys):
    bad = {"version": 1, "protocol": "nope", "n": 4, "f": 1, "L": 4}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    rc = cli.main(["run", "--scenario", str(path)])
    captured = capsys.readouterr()
    assert rc == 2
    assert "protocol" in captured.err


def test_validate_collects_paths():
    errors = validate({"version": 1, "protocol": "msc", "n": 4, "f": 1, "slots": 0})
    assert any(path == "slots" for path, _ in errors)
    errors = validate({
        "version": 1, "protocol": "pc3", "n": 4, "f": 1, "L": 4,
        "adversary": {"kind": "silent", "byzantine": [0, 1]},
    })
    assert any(path == "adversary.byzantine" for path, _ in errors)


def test_cli_determinism_same_artifacts(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        rc = cli.main([
            "--quiet", "run", "--scenario", scenario_path("spc_splitview_n4.json"),
            "--out", str(out),
        ])
        assert rc == 0
    assert (out1 / "metrics.json").read_bytes() == (out2 / "metrics.json").read_bytes()
    assert (out1 / "transcript.log").read_bytes() == (out2 / "transcript.log").read_bytes()


def test_sweep_reports_exponents(tmp_path):
    rc = cli.main([
        "--quiet", "sweep", "--scenario", scenario_path("sweep_pc3.json"),
        "--ns", "4,7", "--out", str(tmp_path),
    ])
    assert rc == 0
    doc = json.loads((tmp_path / "sweep.json").read_text())
    assert len(doc["rows"]) == 2
    assert doc["rows"][0]["messages"] == 36


def test_check_suite_passes():
    assert cli.main(["--quiet", "check", "upperbound", "--n", "4", "--runs", "9"]) == 0
    assert cli.main(["--quiet", "check", "equivalence", "--n", "4", "--runs", "5"]) == 0


def test_decode_roundtrip(capsys):
    scn = json.load(open(scenario_path("pc3_faultfree_n4.json")))
    result = run_scenario(scn)
    proof = result.metrics.outputs[0]["low"][1]
    blob = wire.encode(proof)
    rc = cli.main(["decode", "--hex", blob.hex()])
    captured = capsys.readouterr()
    assert rc == 0
    assert "QC" in captured.out and "00000000" in captured.out
    assert cli.main(["decode", "--hex", "00ff"]) == 2
