import csv
import hashlib
import io
import json
import subprocess
import sys

import pytest

from costwise.cli import main
from costwise.hub import load_store


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def logs(tmp_path_factory):
    out = tmp_path_factory.mktemp("logs")
    assert main(["gen", "--templates", "8", "--instances", "6", "--days", "3", "--seed", "3", "--adhoc", "0.1",
                 "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def store(logs, tmp_path_factory):
    path = tmp_path_factory.mktemp("store") / "store.json"
    assert main(["train", str(logs / "day1.jsonl"), str(logs / "day2.jsonl"), "--out", str(path)]) == 0
    return path


def test_gen_counts_and_rerun(tmp_path, capsys):
    argv = ["gen", "--templates", "50", "--instances", "10", "--days", "3", "--seed", "7"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b"), "--jobs", "4"]) == 0
    for day in (1, 2, 3):
        a, b = tmp_path / "a" / f"day{day}.jsonl", tmp_path / "b" / f"day{day}.jsonl"
        assert len(a.read_text().splitlines()) == 500
        assert _digest(a) == _digest(b)
    assert "ad-hoc share: 0.0000" in capsys.readouterr().out


def test_gen_reports_adhoc_share(tmp_path, capsys):
    assert main(["gen", "--templates", "20", "--instances", "5", "--days", "1", "--adhoc", "0.15",
                 "--out", str(tmp_path)]) == 0
    share = float(capsys.readouterr().out.split("ad-hoc share:")[1])
    assert abs(share - 0.15) <= 0.02


def test_train_writes_all_maps(store, capsys):
    loaded = load_store(store)
    for fam in ("subgraph", "approx", "input", "operator", "combined"):
        assert loaded.family(fam), fam


def test_train_parallel_is_byte_identical(logs, store, tmp_path):
    par = tmp_path / "par.json"
    assert main(["train", str(logs / "day1.jsonl"), str(logs / "day2.jsonl"), "--out", str(par), "--jobs", "8"]) == 0
    assert par.read_bytes() == store.read_bytes()


def test_train_prints_counts(logs, tmp_path, capsys):
    main(["train", str(logs / "day1.jsonl"), str(logs / "day2.jsonl"), "--out", str(tmp_path / "s.json")])
    out = capsys.readouterr().out
    assert "combined:" in out and "trained in" in out


def test_train_needs_two_days(logs, tmp_path, capsys):
    assert main(["train", str(logs / "day1.jsonl"), "--out", str(tmp_path / "s.json")]) == 2
    assert "two day files" in capsys.readouterr().err


def test_eval_csv(logs, store, tmp_path):
    out = tmp_path / "eval.csv"
    assert main(["eval", str(logs / "day3.jsonl"), "--store", str(store), "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert {r["family"] for r in rows} == {"subgraph", "approx", "input", "operator", "combined", "default"}
    assert float(next(r for r in rows if r["family"] == "combined")["coverage"]) == 1.0


def test_eval_empty_test_set(store, tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["eval", str(empty), "--store", str(store)]) == 2
    assert "empty test set" in capsys.readouterr().err


def test_missing_store(logs, tmp_path, capsys):
    assert main(["eval", str(logs / "day3.jsonl"), "--store", str(tmp_path / "nope.json")]) == 2
    assert "store not found" in capsys.readouterr().err


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["eval"])
    assert exc.value.code == 1


def test_optimize_example(capsys):
    assert main(["optimize", "--example"]) == 0
    cap = capsys.readouterr()
    lines = cap.err.splitlines()
    assert "partitions=16" in lines[1] and "cost=125" in lines[1]
    json.loads(cap.out)


def test_optimize_with_store(logs, store, tmp_path, capsys):
    plan = tmp_path / "plan.json"
    plan.write_text(json.dumps({
        "op": "Output", "stats": {"C": 1e5, "L": 50},
        "children": [{"op": "Filter", "stats": {"C": 1e5, "L": 50},
                      "children": [{"op": "Get", "inputs": ["Clicks_2020-01-01.tsv"],
                                    "stats": {"I": 1e6, "C": 1e6, "L": 50}}]}],
    }))
    out = tmp_path / "opt.json"
    for mode in ("FixedPartitions", "Sampling", "Analytical"):
        assert main(["optimize", "--store", str(store), "--plan", str(plan), "--mode", mode, "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["predicted_ms"] >= 0 and doc["mode"] == mode


def test_bench_explore_csv(logs, store, tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench-explore", str(logs / "day3.jsonl"), "--store", str(store), "--stages", "10",
                 "--gen-seed", "3", "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    names = [r["strategy"] for r in rows]
    assert names[0] == "Geometric(s=1)" and names[-1] == "Analytical" and "Uniform(k=20)" in names
    ana = rows[-1]
    assert float(ana["samples"]) == 1.0


def test_compare_summary(store, tmp_path):
    out = tmp_path / "cmp.json"
    assert main(["compare", "--templates", "8", "--instances", "2", "--days", "3", "--seed", "3",
                 "--store", str(store), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["plans"] == 16 and 0.0 <= doc["fraction_improved"] <= 1.0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "costwise.cli", "optimize", "--example"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "partitions=16" in proc.stderr
