import hashlib
import json
import subprocess
import sys

import pytest

from qseer.cli import main, parse_weights
from qseer.dataset import read_records
from qseer.errors import ParameterError
from qseer.graph import read_graphs


def run_cli(*argv):
    return main(list(argv))


class TestParseWeights:
    def test_none(self):
        assert parse_weights("none") == "none"

    def test_uniform(self):
        assert parse_weights("uniform:0.5,2") == ("uniform", 0.5, 2.0)

    def test_exp(self):
        assert parse_weights("exp:1.5") == ("exp", 1.5)

    def test_bad(self):
        with pytest.raises(ParameterError):
            parse_weights("gauss:1")


class TestBasicInvocation:
    def test_version_exits_zero(self):
        proc = subprocess.run([sys.executable, "-m", "qseer.cli", "--version"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "qseer" in proc.stdout

    def test_unknown_subcommand_exits_two(self):
        proc = subprocess.run([sys.executable, "-m", "qseer.cli", "frobnicate"],
                              capture_output=True, text=True)
        assert proc.returncode == 2

    def test_missing_file_reports_error(self, tmp_path, capsys):
        rc = run_cli("--quiet", "build-dataset", "--graphs",
                     str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "o.jsonl"))
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestStages:
    def test_gen_graphs_enum(self, tmp_path):
        out = tmp_path / "g.jsonl"
        assert run_cli("--quiet", "gen-graphs", "--kind", "enum", "--n", "4",
                       "--out", str(out)) == 0
        assert len(read_graphs(out)) == 6

    def test_gen_graphs_er_weighted(self, tmp_path):
        out = tmp_path / "g.jsonl"
        assert run_cli("--quiet", "gen-graphs", "--kind", "er", "--n", "6",
                       "--count", "3", "--prob", "0.6",
                       "--weights", "uniform:0,1", "--seed", "7",
                       "--out", str(out)) == 0
        graphs = read_graphs(out)
        assert len(graphs) == 3
        assert any(w != 1.0 for g in graphs for _, _, w in g.edges)

    def test_build_normalize_split_chain(self, tmp_path):
        g = tmp_path / "g.jsonl"
        ds = tmp_path / "ds.jsonl"
        nm = tmp_path / "nm.jsonl"
        rpt = tmp_path / "report.json"
        run_cli("--quiet", "gen-graphs", "--kind", "er", "--n", "5", "--count", "10",
                "--prob", "0.7", "--seed", "3", "--out", str(g))
        assert run_cli("--quiet", "build-dataset", "--graphs", str(g),
                       "--depths", "1", "--starts", "8", "--iters", "40",
                       "--seed", "3", "--out", str(ds)) == 0
        assert run_cli("--quiet", "normalize", "--in", str(ds), "--out", str(nm),
                       "--report", str(rpt), "--seed", "3") == 0
        report = json.loads(rpt.read_text())
        assert report["total"]["records"] == 10
        assert run_cli("--quiet", "split", "--in", str(nm), "--ratios", "0.8,0.1,0.1",
                       "--seed", "3") == 0
        records = read_records(nm)
        assert {r.split for r in records} == {"train", "val", "test"}

    def test_mismatched_starts_depths(self, tmp_path):
        g = tmp_path / "g.jsonl"
        run_cli("--quiet", "gen-graphs", "--kind", "enum", "--n", "3", "--out", str(g))
        assert run_cli("--quiet", "build-dataset", "--graphs", str(g),
                       "--depths", "1,2", "--starts", "8",
                       "--out", str(tmp_path / "d.jsonl")) == 1

    def test_train_predict_optimize_eval(self, tmp_path):
        g = tmp_path / "g.jsonl"
        ds = tmp_path / "ds.jsonl"
        model = tmp_path / "model.json"
        hist = tmp_path / "hist.json"
        run_cli("--quiet", "gen-graphs", "--kind", "er", "--n", "5", "--count", "10",
                "--prob", "0.7", "--seed", "4", "--out", str(g))
        run_cli("--quiet", "build-dataset", "--graphs", str(g), "--depths", "1",
                "--starts", "6", "--iters", "40", "--seed", "4", "--out", str(ds))
        run_cli("--quiet", "split", "--in", str(ds), "--ratios", "0.8,0.1,0.1",
                "--seed", "4")
        assert run_cli("--quiet", "train", "--dataset", str(ds), "--epochs", "2",
                       "--pmax", "2", "--seed", "4", "--out", str(model),
                       "--history", str(hist)) == 0
        history = json.loads(hist.read_text())
        assert len(history) == 3  # pre-training row + 2 epochs

        proc = subprocess.run([sys.executable, "-m", "qseer.cli", "--quiet",
                               "predict", "--model", str(model), "--graph", str(g),
                               "--p", "1"], capture_output=True, text=True)
        assert proc.returncode == 0
        lines = [json.loads(ln) for ln in proc.stdout.splitlines()]
        assert len(lines) == 10 and all(len(ln["gamma"]) == 1 for ln in lines)

        opt = tmp_path / "opt.jsonl"
        assert run_cli("--quiet", "optimize", "--graph", str(g), "--p", "1",
                       "--starts", "4", "--iters", "30", "--seed", "4",
                       "--out", str(opt)) == 0
        rows = [json.loads(ln) for ln in opt.read_text().splitlines()]
        assert all(0 < row["ar"] <= 1 + 1e-9 for row in rows)

        out_dir = tmp_path / "eval"
        assert run_cli("--quiet", "eval", "--dataset", str(ds),
                       "--schemes", "random,labeled,linear_ramp,qseer",
                       "--model", str(model), "--split", "test",
                       "--iters", "20", "--bins", "8", "--seed", "4",
                       "--out-dir", str(out_dir)) == 0
        for name in ("initial_ar.csv", "convergence.csv", "stability.csv",
                     "aggregates.csv", "hist_p1_pre.csv", "hist_p1_post.csv",
                     "hist_p1_pre.svg"):
            assert (out_dir / name).exists()

    def test_eval_qseer_without_model_errors(self, tmp_path, capsys):
        g = tmp_path / "g.jsonl"
        ds = tmp_path / "ds.jsonl"
        run_cli("--quiet", "gen-graphs", "--kind", "enum", "--n", "3", "--out", str(g))
        run_cli("--quiet", "build-dataset", "--graphs", str(g), "--depths", "1",
                "--starts", "4", "--iters", "20", "--out", str(ds))
        rc = run_cli("--quiet", "eval", "--dataset", str(ds), "--schemes", "qseer",
                     "--split", "", "--out-dir", str(tmp_path / "e"))
        assert rc == 1
        assert "model" in capsys.readouterr().err


def _digest_tree(root):
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


class TestPipeline:
    def _config(self, tmp_path, out_name):
        cfg = {
            "seed": 11,
            "out_dir": str(tmp_path / out_name),
            "graphs": {"random": [
                {"kind": "er", "n": 5, "count": 8, "prob": 0.7},
            ]},
            "dataset": {"depths": [1], "starts": {"1": 6}, "iters": 40},
            "split": {"ratios": [0.75, 0.125, 0.125]},
            "train": {"epochs": 2, "pmax": 2},
            "eval": {"split": "test", "schemes": ["random", "labeled", "qseer"],
                     "iters": 20, "bins": 8},
        }
        path = tmp_path / f"{out_name}.json"
        path.write_text(json.dumps(cfg))
        return path

    def test_end_to_end_and_determinism(self, tmp_path):
        cfg_a = self._config(tmp_path, "run_a")
        cfg_b = self._config(tmp_path, "run_b")
        assert run_cli("--quiet", "pipeline", "--config", str(cfg_a)) == 0
        assert run_cli("--quiet", "pipeline", "--config", str(cfg_b)) == 0
        a = _digest_tree(tmp_path / "run_a")
        b = _digest_tree(tmp_path / "run_b")
        assert a and set(a) == set(b)
        assert a == b
        for name in ("graphs.jsonl", "dataset.jsonl", "normalized.jsonl",
                     "model.json", "train_history.json", "normalize_report.json",
                     "eval/aggregates.csv"):
            assert name in a

    def test_seed_override_changes_outputs(self, tmp_path):
        cfg = self._config(tmp_path, "run_c")
        assert run_cli("--quiet", "pipeline", "--config", str(cfg), "--seed", "99") == 0
        cfg2 = self._config(tmp_path, "run_d")
        assert run_cli("--quiet", "pipeline", "--config", str(cfg2)) == 0
        da = (tmp_path / "run_c" / "dataset.jsonl").read_bytes()
        db = (tmp_path / "run_d" / "dataset.jsonl").read_bytes()
        assert da != db
