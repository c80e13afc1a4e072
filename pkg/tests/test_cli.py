import csv
import json
import subprocess
import sys

import pytest

from vins.cli import read_config, resolve, run

SYN = "users=60 items=50 edges=900 alpha=1.0 seed=2"


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert run(["split", "--synthetic", SYN, "--out", str(d)]) == 0
    return d


def test_split_outputs(data_dir):
    assert {p.name for p in data_dir.iterdir()} >= {"train.tsv", "test.tsv", "users.idx", "items.idx"}


def test_train_then_evaluate(data_dir, tmp_path, capsys):
    out = tmp_path / "run"
    assert run(["train", "--data", str(data_dir), "--out", str(out), "--epochs", "3", "--dim", "8",
                "--kappa", "8", "--seed", "7", "--eval-every", "1"]) == 0
    text = capsys.readouterr().out
    assert text.count("epoch ") == 3
    for name in ("model.txt", "norms.csv", "steps.csv", "exposure.csv", "epoch_stats.csv", "metrics.jsonl", "run.json"):
        assert (out / name).is_file()
    # --data is taken from run.json next to the checkpoint
    assert run(["evaluate", "--checkpoint", str(out / "model.txt"), "--n", "5", "--n", "10", "--n", "20",
                "--out", str(tmp_path / "ev")]) == 0
    lines = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert [l["N"] for l in lines] == [5, 10, 20]
    assert all(0 <= l["ndcg"] <= 1 for l in lines)


def test_checkpoints_byte_identical(data_dir, tmp_path):
    args = ["train", "--data", str(data_dir), "--epochs", "2", "--dim", "8", "--sampler", "warp",
            "--kappa", "16", "--seed", "3"]
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a/model.txt").read_bytes() == (tmp_path / "b/model.txt").read_bytes()
    assert run(args[:-1] + ["4", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "a/model.txt").read_bytes() != (tmp_path / "c/model.txt").read_bytes()


def test_precedence(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("# comment\nkappa = 16\nmax-shot = 2\nlambda = 0.01\nbeta = 0.25\n")
    a = resolve(["train", "--config", str(cfg), "--beta", "0.75"])
    assert (a.beta, a.kappa, a.max_shot, a.lambda_, a.margin, a.sampler) == (0.75, 16, 2, 0.01, 1.0, "vins")
    b = resolve(["train"])
    assert (b.beta, b.kappa, b.max_shot, b.epochs, b.lr, b.dim) == (0.5, 64, 4, 50, 1e-3, 64)


def test_read_config_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("kappa 16\n")
    assert run(["train", "--config", str(bad)]) == 2
    assert run(["train", "--config", str(tmp_path / "missing.ini")]) == 2
    (tmp_path / "ok.ini").write_text("kappa = many\n")
    assert run(["train", "--config", str(tmp_path / "ok.ini"), "--data", "."]) == 2


def test_usage_errors(data_dir, tmp_path, capsys):
    assert run([]) == 2
    assert run(["bogus"]) == 2
    assert run(["train", "--sampler", "aobpr", "--data", str(data_dir)]) == 2
    assert run(["train", "--data", str(tmp_path / "nope")]) == 2
    assert run(["train", "--data", str(data_dir), "--kappa", "0", "--out", str(tmp_path / "x")]) == 2
    assert run(["evaluate", "--checkpoint", str(tmp_path / "none.txt")]) == 2
    assert run(["split", "--out", str(tmp_path / "s")]) == 2
    assert run(["split", "--synthetic", "users=3", "--out", str(tmp_path / "s")]) == 2
    assert "error" in capsys.readouterr().err


def test_bad_input_file(tmp_path):
    f = tmp_path / "x.tsv"
    f.write_text("a\tb\n")
    assert run(["split", "--input", str(f), "--out", str(tmp_path / "o")]) == 1


def test_analyze_commands(tmp_path, capsys):
    assert run(["analyze-balance", "--items", "5", "--trials", "100000", "--seed", "1", "--out", str(tmp_path)]) == 0
    row = next(csv.DictReader(open(tmp_path / "balance.csv")))
    assert float(row["max_abs_flux_gap"]) <= 3e-3 and float(row["analytic_gap"]) == 0
    assert run(["analyze-balance", "--trials", "10", "--out", str(tmp_path)]) == 2
    assert run(["analyze-bias", "--zw", "100", "--points", "50", "--samples", "1000", "--out", str(tmp_path)]) == 0
    assert len(list(csv.DictReader(open(tmp_path / "bias.csv")))) == 50
    assert run(["analyze-iv", "--synthetic", SYN, "--beta", "0", "--beta", "1", "--out", str(tmp_path)]) == 0
    assert len(list(csv.DictReader(open(tmp_path / "iv.csv")))) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "vins", "analyze-bias", "--zw", "10", "--points", "3",
                        "--out", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 0 and "bias:" in r.stdout
