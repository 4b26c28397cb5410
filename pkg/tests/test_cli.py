import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from cli_cases import invocations, make_inputs, snapshot, strip_timestamp, write
from repsample.cli import main


def kv(path):
    with open(path, newline="") as fh:
        return {r["key"]: r["value"] for r in csv.DictReader(fh)}


@pytest.fixture
def files(tmp_path):
    return tmp_path, make_inputs(tmp_path)


def test_every_subcommand_deterministic(files):
    d, f = files
    for argv, outputs in invocations(d, f):
        assert main(argv) == 0, argv
        first = snapshot(outputs)
        manifests = [strip_timestamp(p + ".manifest.json") for p in outputs]
        assert main(argv) == 0, argv
        assert snapshot(outputs) == first, argv
        assert [strip_timestamp(p + ".manifest.json") for p in outputs] == manifests


def test_rerun_reproduces(files):
    d, f = files
    for argv, outputs in invocations(d, f):
        assert main(argv) == 0
    for argv, outputs in invocations(d, f):
        expected = snapshot(outputs)
        for p in outputs:
            Path(p).unlink()
        assert main(["rerun", outputs[0] + ".manifest.json"]) == 0
        assert snapshot(outputs) == expected, argv


def test_stratify_auto_threshold(files):
    d, f = files
    args = ["stratify", "--units", f["units4"], "--out-dense", str(d / "a.csv"), "--out-sparse", str(d / "b.csv"),
            "--summary", str(d / "s.csv")]
    assert main(args) == 0
    summary = kv(d / "s.csv")
    assert float(summary["threshold"]) == pytest.approx(0.075)
    assert (summary["dense_units"], summary["sparse_units"]) == ("3", "1")


def test_enrich_reports_out_of_grid(files):
    d, f = files
    assert main(["enrich", "--units", f["units4"], "--pois", f["pois"], "--out", str(d / "e.csv"),
                 "--summary", str(d / "s.csv")]) == 0
    assert kv(d / "s.csv")["out_of_grid_count"] == "1"
    with open(d / "e.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert {"d0", "d1", "d2", "mul", "builtup"} <= set(rows[0])


def test_resolve_uses_class_order(files):
    d, f = files
    assert main(["resolve", "--pixels", f["pixels"], "--classes", f["classes"], "--out", str(d / "l.csv")]) == 0
    lines = (d / "l.csv").read_text().splitlines()
    assert lines == ["instance_id,class_id,class_name", "1,0,flat", "2,2,hip", "3,1,gable"]


def test_eval_values(files):
    d, f = files
    assert main(["eval", "--mode", "binary", "--pred", f["pred"], "--truth", f["truth"], "--out", str(d / "m.csv")]) == 0
    with open(d / "m.csv", newline="") as fh:
        values = {r["metric"]: float(r["value"]) for r in csv.DictReader(fh)}
    assert (values["tp"], values["fp"], values["fn"], values["tn"]) == (2, 1, 1, 2)
    assert values["f1"] == pytest.approx(2 / 3)


@pytest.mark.parametrize("argv", [
    [],
    ["nonsense"],
    ["sample", "--units", "x.csv"],
    ["stratify", "--units", "{units4}", "--threshold", "1.5", "--out-dense", "a", "--out-sparse", "b"],
    ["stratify", "--units", "{units4}", "--threshold", "abc", "--out-dense", "a", "--out-sparse", "b"],
    ["grid", "--out", "g.csv"],
    ["compare", "--methods", "random,bogus", "--nx", "4", "--ny", "4", "--out", "r.csv"],
])
def test_usage_errors(files, argv, capsys):
    d, f = files
    argv = [a.format(**f) for a in argv]
    assert main(argv) == 1
    assert "usage" in capsys.readouterr().err


def test_data_errors(files, capsys, tmp_path):
    d, f = files
    bad = write(tmp_path / "bad.csv", "id,x,y,cell_side,builtup\n0,1,1,1,zzz\n")
    assert main(["stratify", "--units", bad, "--out-dense", "a", "--out-sparse", "b"]) == 2
    err = capsys.readouterr().err
    assert "bad.csv:2" in err
    assert main(["stratify", "--units", str(tmp_path / "missing.csv"), "--out-dense", "a", "--out-sparse", "b"]) == 2
    # raw units without diversity columns
    assert main(["sample", "--units", f["units4"], "--n", "2", "--out", str(tmp_path / "s.csv")]) == 2


def test_manifest_contents(files):
    d, f = files
    out = str(d / "g.csv")
    assert main(["grid", "--bbox", "0,0,2000,1000", "--out", out]) == 0
    m = json.loads(Path(out + ".manifest.json").read_text())
    assert m["subcommand"] == "grid"
    assert m["argv"] == ["grid", "--bbox", "0,0,2000,1000", "--out", out]
    assert m["config"]["cell_side"] == 1000.0
    assert set(m["outputs"]) == {out}
    assert "timestamp" in m


def test_console_entry_point(files):
    d, _ = files
    proc = subprocess.run([sys.executable, "-m", "repsample.cli", "grid", "--bbox", "0,0,1000,1000",
                           "--out", str(d / "g.csv")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "cells: 1" in proc.stdout
