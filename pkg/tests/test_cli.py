import csv
import json
import re

import pytest

from bamboo_trim.cli import main


def test_simulate_inline(capsys, tmp_path):
    assert main(["simulate", "--rates", "1/2,1/2", "--strategy", "reduce-max", "--horizon", "1",
                 "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("backlog 1/2")
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["max_intermediate"] == "1/2"
    lines = (tmp_path / "trace.jsonl").read_text().splitlines()
    assert json.loads(lines[0]) == {"step": 1, "intermediate": ["1/2", "1/2"], "cut": 0, "post": ["0/1", "1/2"]}


def test_simulate_construction_default_horizon(capsys):
    assert main(["simulate", "--construction", "uniform:4:2", "--strategy", "reduce-fastest:2"]) == 0
    assert "backlog 11/4" in capsys.readouterr().out


def test_simulate_rates_file(tmp_path, capsys):
    f = tmp_path / "r.csv"
    f.write_text("rate\n1/4\n3/4\n")
    assert main(["simulate", "--rates", str(f), "--strategy", "deadline-driven", "--horizon", "50"]) == 0
    assert capsys.readouterr().out.startswith("backlog ")


def test_simulate_random_and_processors(tmp_path, capsys):
    assert main(["simulate", "--rates", "random:6", "--seed", "3", "--processors", "2",
                 "--strategy", "deadline-driven", "--horizon", "100", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["processors"] == 2


@pytest.mark.parametrize("argv", [
    ["simulate", "--rates", "1/2,2/3", "--strategy", "reduce-max", "--horizon", "5"],
    ["simulate", "--rates", "1/2", "--strategy", "reduce-min", "--horizon", "5"],
    ["simulate", "--rates", "1/2", "--strategy", "reduce-max"],
    ["simulate", "--construction", "uniform:0:2", "--strategy", "reduce-max"],
    ["simulate", "--rates", "1/2", "--strategy", "reduce-max", "--horizon", "5", "--processors", "0"],
    ["sweep", "--construction", "uniform:4:{x}", "--strategy", "reduce-fastest:{x}"],
    ["sweep", "--construction", "uniform:4:{y}", "--strategy", "reduce-max", "--grid", "x=1"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 2
    assert "error" in capsys.readouterr().err


def test_argparse_errors_exit_two():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "bogus"])
    assert exc.value.code == 2


def test_sweep_csv(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--construction", "uniform:{n}:{x}", "--strategy", "reduce-fastest:{x}",
                 "--grid", "n=4,10", "--grid", "x=2,3", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4
    by = {(r["n"], r["x"]): r for r in rows}
    # uniform(n, x) under Reduce-Fastest(x) reaches x + (n-1)/n exactly
    assert by[("4", "2")]["backlog"] == "11/4"
    assert by[("10", "3")]["backlog"] == "39/10"
    assert by[("4", "2")]["theorem_bound"] == "3/1"
    assert by[("4", "2")]["reference_bound"] == "19/6"


def test_sweep_parallel_matches_serial(tmp_path):
    args = ["sweep", "--construction", "two-bamboo:{e}", "--strategy", "deadline-driven", "--grid", "e=1/4,1/10"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--jobs", "2", "--out", str(b)]) == 0
    assert a.read_text() == b.read_text()


def test_verify_oracle_passes(capsys):
    assert main(["verify", "oracle"]) == 0
    assert re.search(r"\[PASS\]\s+10\.", capsys.readouterr().out)


def test_verify_broken_strategy_fails(capsys):
    assert main(["verify", "reduce-max", "--inject-broken-strategy"]) == 1
    assert re.search(r"\[FAIL\]\s+1\.", capsys.readouterr().out)


def test_construct_round_trip(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["construct", "rf1-fast-slow:4", "--out", str(out)]) == 0
    lines = out.read_text().split()
    assert lines == ["rate"] + ["1/6"] * 4 + ["1/10"] * 3
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["predicted_backlog_lower_bound"] == "8/5"
    assert main(["simulate", "--rates", str(out), "--strategy", "reduce-fastest:1", "--horizon", "20"]) == 0
