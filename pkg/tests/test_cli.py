import csv
import json
from pathlib import Path

import pytest

from jointqec.cli import EXIT_NOT_HS, EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main

MODELS = Path(__file__).parent.parent / "models"


def test_hnls_exit_codes(capsys):
    assert main(["hnls", str(MODELS / "single_qubit.json")]) == EXIT_OK
    assert "achievable: yes" in capsys.readouterr().out
    assert main(["hnls", str(MODELS / "qubit_no_heisenberg.json")]) == EXIT_NOT_HS
    assert "achievable: no" in capsys.readouterr().out


def test_usage_errors(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["hnls", "does_not_exist.json"]) == EXIT_USAGE
    assert main(["show", "nope"]) == EXIT_USAGE
    assert main(["bench-sud", "--dmin", "5", "--dmax", "3"]) == EXIT_USAGE


def test_model_format_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": "jointqec-model/1", "dim": "two"}')
    assert main(["hnls", str(bad)]) == EXIT_USAGE
    assert "$.dim" in capsys.readouterr().err


def test_jnt_not_achievable():
    assert main(["jnt", str(MODELS / "qubit_no_heisenberg.json")]) == EXIT_NOT_HS


def test_jnt_writes_csv_and_code_then_verify(tmp_path, capsys):
    out = tmp_path / "run.csv"
    model = str(MODELS / "qubit_weighted.json")
    assert main(["jnt", model, "--out", str(out)]) == EXIT_OK
    report = capsys.readouterr().out
    assert "optimal joint cost" in report
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["parameter", "variance", "weight", "weighted_variance"]
    assert len(rows) == 3
    code_path = tmp_path / "run.code.json"
    assert main(["verify", model, str(code_path)]) == EXIT_OK
    assert "verdict: valid" in capsys.readouterr().out
    # a corrupted amplitude breaks orthonormality and error correction
    data = json.loads(code_path.read_text())
    data["states"][0][0] = [3.0, 0.0]
    bad = tmp_path / "bad.code.json"
    bad.write_text(json.dumps(data))
    assert main(["verify", model, str(bad)]) == EXIT_VERIFY


def test_verify_dimension_mismatch(tmp_path):
    out = tmp_path / "run.csv"
    assert main(["jnt", "single_qubit", "--out", str(out)]) == EXIT_OK
    assert main(["verify", "maximal_advantage:3", str(tmp_path / "run.code.json")]) == EXIT_USAGE


def test_sep_report(tmp_path, capsys):
    out = tmp_path / "sep.csv"
    assert main(["sep", "single_qubit", "--restarts", "2", "--seed", "3", "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "best-found separate cost" in text and "restarts 2, seed 3" in text
    assert "QFI trace bound" in text
    rows = list(csv.reader(out.open()))
    assert rows[0][:3] == ["parameter", "fisher", "weight"]


def test_sep_general_w_skips_bounds(capsys):
    assert main(["sep", str(MODELS / "qubit_weighted.json"), "--restarts", "1"]) == EXIT_OK
    assert "skipped" in capsys.readouterr().out


def test_show(capsys):
    assert main(["show", "su_d_jz:3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "d=3  P=6" in out and "lindblad span dimension: 3" in out
    assert main(["show", "single_qubit", "--json"]) == EXIT_OK
    out = capsys.readouterr().out
    assert '"schema": "jointqec-model/1"' in out


def test_bench_small(tmp_path, capsys):
    assert main(["bench-sud", "--dmin", "3", "--dmax", "3", "--out", str(tmp_path / "b")]) == EXIT_OK
    out = capsys.readouterr().out
    assert (tmp_path / "b.csv").exists() and (tmp_path / "b.dat").exists()
    assert "ok" in out


def test_version(capsys):
    assert main(["--version"]) == EXIT_OK
    assert "0.1.0" in capsys.readouterr().out
