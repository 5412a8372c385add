import csv
import json
import subprocess
import sys

import pytest

from adncount import cli
from adncount.cli import UsageError, execute, main, parse_args


def test_parse_defaults():
    cfg = parse_args(["--n", "3", "--topology", "static-path"])
    assert cfg.mode == "run" and cfg.n == 3 and cfg.function == "count"
    assert cfg.backend_for(3).tag == "exact"
    assert cfg.epsilon.describe() == "auto"


def test_parse_float_default_for_large_n():
    cfg = parse_args(["--n", "8", "--topology", "dynamic-permuted-path", "--seed", "42"])
    assert cfg.backend_for(8).tag == "float64"
    assert cfg.schedule_for(8, 42).kind == "dynamic_permuted_path"


@pytest.mark.parametrize("argv", [
    ["--function", "sum", "--n", "3"],
    ["--n", "3", "--bogus"],
    ["--n", "1"],
    ["--mode", "sweep"],
    ["--n", "3", "--topology", "from-file"],
    ["--n", "3", "--epsilon", "-1"],
    ["--n", "3", "--reps", "0"],
    ["--n", "3", "--trace-stride", "0"],
    ["--n", "3", "--topology", "static-star", "--schedule-file", "x.txt"],
])
def test_usage_errors(argv):
    with pytest.raises(UsageError):
        parse_args(argv)


def test_usage_exit_status(capsys):
    assert main(["--function", "sum", "--n", "3"]) == cli.EXIT_USAGE
    assert "needs --values" in capsys.readouterr().err


def test_values_file_checks(tmp_path):
    vals = tmp_path / "v.txt"
    vals.write_text("0\n5\n")
    with pytest.raises(UsageError, match="expected 3"):
        parse_args(["--n", "3", "--function", "sum", "--values", str(vals)])
    vals.write_text("0\n-5\n3\n")
    with pytest.raises(UsageError):
        parse_args(["--n", "3", "--function", "sum", "--values", str(vals)])
    with pytest.raises(UsageError):
        parse_args(["--n", "3", "--values", str(vals)])


def test_run_writes_outputs(tmp_path):
    out, met, tr = tmp_path / "o.json", tmp_path / "m.csv", tmp_path / "t.jsonl"
    status = main(["--n", "2", "--topology", "static-path", "--outcome-out", str(out),
                   "--metrics-out", str(met), "--trace-out", str(tr), "--trace-stride", "1000"])
    assert status == 0
    doc = json.loads(out.read_text())
    assert doc["outputs"] == [2, 2] and doc["total_rounds"] == 4541 and doc["schema"] == "1"
    rows = list(csv.DictReader(met.open()))
    assert len(rows) == 1 and rows[0]["k"] == "2" and rows[0]["accepted"] == "1"
    lines = [json.loads(x) for x in tr.read_text().splitlines()]
    assert lines[-1]["event"] == "epoch_end" and lines[-1]["round"] == 4541


def test_run_sum_to_stdout(tmp_path, capsys):
    vals = tmp_path / "v.txt"
    vals.write_text("0\n5\n3\n")
    assert main(["--n", "3", "--function", "sum", "--values", str(vals), "--value-width", "4"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["aggregate"] == {"sum": 8, "average": "8/3"}


def test_runtime_error_removes_partial_outputs(tmp_path, capsys):
    sched = tmp_path / "s.txt"
    sched.write_text("0-1\n" * 50)
    out = tmp_path / "o.json"
    status = main(["--n", "2", "--schedule-file", str(sched), "--outcome-out", str(out)])
    assert status == cli.EXIT_RUNTIME
    assert not out.exists()
    assert "exhausted" in capsys.readouterr().err


def test_runtime_error_after_partial_write(tmp_path, monkeypatch):
    out, met = tmp_path / "o.json", tmp_path / "m.csv"

    def broken(_):
        raise OSError("disk full")

    monkeypatch.setattr(cli.reporting, "metrics_csv", broken)
    cfg = parse_args(["--n", "2", "--outcome-out", str(out), "--metrics-out", str(met)])
    assert execute(cfg) == cli.EXIT_RUNTIME
    assert not out.exists() and not met.exists()


def test_sweep_rows_and_determinism(tmp_path):
    argv = ["--mode", "sweep", "--n-max", "5", "--reps", "3", "--topology", "dynamic-random-tree",
            "--backend", "float64"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(argv + ["--metrics-out", str(a)]) == 0
    assert main(argv + ["--metrics-out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(a.open()))
    assert len(rows) == 12
    expected = {2: 4541, 3: 38267, 4: 169584, 5: 553014}
    for row in rows:
        assert int(row["total_rounds"]) == expected[int(row["n"])]
        assert row["outputs_ok"] == "1" and row["stopped_simultaneously"] == "1"


def test_run_outputs_are_byte_identical(tmp_path):
    paths = [tmp_path / "x.json", tmp_path / "y.json"]
    for p in paths:
        assert main(["--n", "3", "--topology", "dynamic-random-connected", "--seed", "7",
                     "--outcome-out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_verify_mode(tmp_path):
    report = tmp_path / "verify.txt"
    assert main(["--mode", "verify", "--n-max", "3", "--topology", "dynamic-permuted-path",
                 "--outcome-out", str(report)]) == 0
    lines = report.read_text().splitlines()
    assert lines and all(" PASS " in f" {x} " for x in lines)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "adncount", "--n", "2"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["outputs"] == [2, 2]
