import json

from wdmsim.cli import main
from wdmsim.metrics import read_csv

SMALL = ["--requests", "5", "--flits", "4"]


def test_single_run(capsys):
    assert main(SMALL) == 0
    out = capsys.readouterr().out
    assert out.startswith("Number of Wavelengths - 4, Control Wavelengths - 1")


def test_config_error_exit(capsys):
    assert main(["--wavelengths", "4", "--control", "4"]) == 1
    assert "configuration error" in capsys.readouterr().err


def test_unknown_flag_exit(capsys):
    assert main(["--bogus"]) == 1


def test_missing_topology_file():
    assert main(["--topology", "/nonexistent.json"]) == 1


def test_invariant_violation_exit(capsys):
    assert main(SMALL + ["--start", "fixed-delay", "--start-delay-us", "0"]) == 2
    assert "invariant violation" in capsys.readouterr().err


def test_topology_file(tmp_path, capsys):
    path = tmp_path / "line.json"
    path.write_text(json.dumps({"nodes": ["A", "B", "C"], "edges": [["A", "B"], ["B", "C"]]}))
    assert main(SMALL + ["--topology", str(path), "--format", "csv"]) == 0
    [row] = read_csv(capsys.readouterr().out)
    assert row["makespan_us"] > 0


def test_seeds_aggregate(tmp_path, capsys):
    csv_path = tmp_path / "out.csv"
    args = SMALL + ["--mode", "baseline", "--seeds", "3", "--csv", str(csv_path)]
    assert main(args) == 0
    assert "[" in capsys.readouterr().out
    rows = read_csv(csv_path.read_text())
    assert [r["seed"] for r in rows] == [0, 1, 2]


def test_paper_sweep_small(tmp_path, capsys):
    csv_path = tmp_path / "sweep.csv"
    assert main(SMALL + ["--paper-sweep", "--csv", str(csv_path), "--jobs", "2"]) == 0
    out = capsys.readouterr().out
    assert out.count("Number of Wavelengths") == 3
    rows = read_csv(csv_path.read_text())
    assert len(rows) == 24
    assert {r["mode"] for r in rows} == {"baseline", "proposed-connection"}


def test_datagram_and_dynamic(capsys):
    args = ["--topology", "ring5", "--pairs", "uniform", "--mode", "proposed-datagram",
            "--dynamic-control", "--arrival", "poisson", "--rate", "2"] + SMALL
    assert main(args) == 0
