"""End-to-end checks of the command-line front end (in-process)."""

import json

import pytest

from pagurus.cli import main
from pagurus.engine import POLICIES
from pagurus.repack import load_manifest_file


def write_config(tmp_path, **overrides):
    doc = {
        "duration": 200.0,
        "policies": ["pagurus"],
        "seed": 5,
        "actions": {
            "alpha": {"exec_mean": 0.1, "cold_mean": 1.0,
                      "qos": {"latency_target": 1.5, "required_percentile": 0.95}},
            "beta": {"libraries": {"numpy": "1.16"},
                     "exec_mean": 0.4, "cold_mean": 1.2,
                     "qos": {"latency_target": 3.0, "required_percentile": 0.95}},
        },
        "workload": {
            "alpha": {"kind": "fixed_interval", "period": 60, "offset": 30},
            "beta": {"kind": "batch", "period": 25, "size": 3, "offset": 7},
        },
    }
    doc.update(overrides)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    return path


def test_fixture_default_eleven_actions_six_plain(tmp_path, capsys):
    out = tmp_path / "fix.tsv"
    assert main(["fixture", "--out", str(out)]) == 0
    registry = load_manifest_file(out)
    assert len(registry) == 11
    plain = [n for n, m in registry.items() if not m.has_extra_libraries]
    assert sorted(plain) == ["cdb", "clou", "dd", "fop", "lp", "mm"]


def test_fixture_empty_flag_strips_all_libraries(tmp_path):
    out = tmp_path / "fix.tsv"
    assert main(["fixture", "--empty", "--out", str(out)]) == 0
    registry = load_manifest_file(out)
    assert len(registry) == 11
    assert all(not m.has_extra_libraries for m in registry.values())


def test_fixture_stdout_mode(capsys):
    assert main(["fixture"]) == 0
    lines = [l for l in capsys.readouterr().out.splitlines() if l.strip()]
    assert len(lines) == 11


def test_check_accepts_valid_config(tmp_path, capsys):
    path = write_config(tmp_path)
    assert main(["check", "--config", str(path)]) == 0
    out = capsys.readouterr().out
    assert "ok" in out and "alpha" in out


def test_check_reports_field_path(tmp_path, capsys):
    path = write_config(tmp_path, workload={
        "alpha": {"kind": "poisson", "rate": -2.0}})
    assert main(["check", "--config", str(path)]) == 2
    err = capsys.readouterr().err
    assert "workload.alpha" in err


def test_check_cites_json_parse_position(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"duration": 100,\n  "actions": ???}\n')
    assert main(["check", "--config", str(path)]) == 2
    assert ":2:" in capsys.readouterr().err


def test_run_writes_one_report_per_policy(tmp_path, capsys):
    path = write_config(tmp_path)
    out = tmp_path / "reports"
    assert main(["run", "--config", str(path), "--policy", "all",
                 "--out", str(out)]) == 0
    files = sorted(p.name for p in out.glob("report_*.json"))
    assert len(files) == len(POLICIES)
    assert all("seed5" in name for name in files)


def test_run_reports_are_byte_identical_across_calls(tmp_path, capsys):
    path = write_config(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        assert main(["run", "--config", str(path), "--out", str(out)]) == 0
    name = "report_pagurus_seed5.json"
    assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
    rec = "report_pagurus_seed5.records"
    assert (out_a / rec).read_bytes() == (out_b / rec).read_bytes()


def test_run_seed_flag_overrides_config(tmp_path, capsys):
    path = write_config(tmp_path)
    out = tmp_path / "reports"
    assert main(["run", "--config", str(path), "--seed", "42",
                 "--out", str(out)]) == 0
    report = json.loads((out / "report_pagurus_seed42.json").read_text())
    assert report["seed"] == 42


def test_run_rejects_malformed_manifest_with_line_number(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("alpha\tNL\t\nnot a manifest line\n")
    path = write_config(tmp_path, manifest_file="bad.tsv")
    assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "bad.tsv:2" in err


def test_run_honors_sim_log_env(tmp_path, capsys, monkeypatch):
    path = write_config(tmp_path)
    monkeypatch.setenv("PAGURUS_SIM_LOG", "nonsense")
    assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == 2
    monkeypatch.setenv("PAGURUS_SIM_LOG", "audit")
    assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == 0


def test_sweep_writes_result_file(tmp_path, capsys):
    assert main(["sweep", "--experiment", "container-count", "--target", "md",
                 "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "sweep_container-count.json").read_text())
    assert data["target"] == "md"
    assert [row["qps"] for row in data["rows"]] == [0.2, 0.5, 1.0, 2.0]


def test_sweep_rejects_unknown_target(tmp_path, capsys):
    assert main(["sweep", "--experiment", "burst", "--target", "nope",
                 "--out", str(tmp_path)]) == 2
    assert "nope" in capsys.readouterr().err


def test_sweep_breakdown_covers_catalog(tmp_path, capsys):
    assert main(["sweep", "--experiment", "latency-breakdown",
                 "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "sweep_latency-breakdown.json").read_text())
    assert len(data) == 11
    assert all(0 < row["startup_fraction"] < 1 for row in data.values())
