import json
from pathlib import Path

import numpy as np
import pytest

from alpalab.cli import main, run_benchmark
from alpalab.config import ConfigError, load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = """
schema_version = 1
seeds = [0, 1]

[dataset]
train_fraction = 0.8

[dataset.generate]
num_classes = 3
n_max = 60
imbalance_ratio = 4.0
dims = 3
cluster_separation = 4.0
seed = 0

[training]
learning_rate = 0.05
epochs = 5
"""


def write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestPade:
    def test_canonical_neg(self, capsys):
        code, out, _ = run(["pade", "derive", "--target", "bce-neg", "--m", "1", "--n", "1"], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload["canonical"] == {"c0": -1.0, "c1": 1.0, "d1": 0.0}
        assert payload["matches_canonical"] is False and "note" in payload
        assert payload["den"] == pytest.approx([1.0, -0.5])

    def test_canonical_pos(self, capsys):
        code, out, _ = run(["pade", "derive", "--target", "bce-pos"], capsys)
        assert json.loads(out)["canonical"] == {"a0": -1.5, "a1": 1.5, "b1": 0.0}

    def test_truncation(self, capsys):
        code, out, _ = run(["pade", "derive", "--target", "bce-pos", "--m", "1", "--n", "0"], capsys)
        payload = json.loads(out)
        assert code == 0 and payload["num"] == [0.0, 1.0] and payload["den"] == [1.0]
        assert "canonical" not in payload

    def test_invalid_target(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["pade", "derive", "--target", "mse"])
        assert exc.value.code == 2
        assert "invalid choice" in capsys.readouterr().err

    def test_solver_error_exit_one(self, capsys):
        code, _, err = run(["pade", "derive", "--target", "bce-pos", "--m", "2", "--n", "1",
                            "--order", "1"], capsys)
        assert code == 1 and "series too short" in err


class TestCurvesAndChecks:
    def test_default_grid(self, tmp_path, capsys):
        out = tmp_path / "c.csv"
        assert run(["grad-curve", "--out", out], capsys)[0] == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "p,grad_ce,grad_focal,grad_asl,grad_alpa"
        assert len(lines) == 1002

    def test_small_grid_and_gamma(self, tmp_path, capsys):
        out = tmp_path / "c.csv"
        run(["grad-curve", "--grid", 11, "--out", out], capsys)
        assert len(out.read_text().splitlines()) == 12
        run(["grad-curve", "--gamma-neg", 2, "--out", out], capsys)
        rows = np.loadtxt(out, delimiter=",", skiprows=1)
        assert abs(rows[np.argmax(rows[:, 4]), 0] - 0.75) <= 1e-3

    def test_gradcheck_passes(self, capsys):
        code, out, _ = run(["gradcheck"], capsys)
        assert code == 0 and out.strip().splitlines()[-1].startswith("PASS")

    def test_gen_data(self, tmp_path, capsys):
        out = tmp_path / "d.csv"
        code, msg, _ = run(["gen-data", "--classes", 5, "--n-max", 1000, "--ratio", 10,
                            "--dims", 2, "--out", out], capsys)
        assert code == 0 and "[1000, 562, 316, 178, 100]" in msg
        assert out.read_text().splitlines()[0] == "f0,f1,label"

    def test_gen_data_bad_ratio(self, tmp_path, capsys):
        code, _, err = run(["gen-data", "--classes", 3, "--n-max", 10, "--ratio", 100,
                            "--out", tmp_path / "d.csv"], capsys)
        assert code == 1 and "ratio too large" in err


class TestTrain:
    def test_artifacts(self, tmp_path, capsys):
        cfg = write(tmp_path, SMALL + '\n[loss]\nkind = "alpa"\nvariant = "v2"\n')
        out = tmp_path / "out"
        code, _, _ = run(["train", cfg, "--out", out, "--cv", 2], capsys)
        assert code == 0
        for name in ("checkpoint.json", "history.json", "metrics.json", "cv.json"):
            assert (out / name).is_file()
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["loss_spec"]["variant"] == "v2" and metrics["seed"] == 0
        assert len(json.loads((out / "history.json").read_text())["train_loss"]) == 5
        assert len(json.loads((out / "cv.json").read_text())["folds"]) == 2

    def test_byte_identical(self, tmp_path, capsys):
        cfg = write(tmp_path, SMALL + '\n[loss]\nkind = "focal"\ngamma_pos = 2.0\n')
        run(["train", cfg, "--out", tmp_path / "a"], capsys)
        run(["train", cfg, "--out", tmp_path / "b"], capsys)
        for name in ("checkpoint.json", "history.json", "metrics.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_shipped_smoke(self, tmp_path, capsys):
        code, out, _ = run(["train", CONFIGS / "smoke.toml", "--out", tmp_path], capsys)
        assert code == 0
        assert json.loads((tmp_path / "metrics.json").read_text())["balanced_accuracy"] >= 0.95

    def test_missing_loss(self, tmp_path, capsys):
        code, _, err = run(["train", write(tmp_path, SMALL), "--out", tmp_path], capsys)
        assert code == 2 and "'loss'" in err

    def test_missing_config(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train"])
        assert exc.value.code == 2

    def test_csv_dataset(self, tmp_path, capsys):
        run(["gen-data", "--classes", 2, "--n-max", 40, "--ratio", 2, "--dims", 2,
             "--separation", 6, "--out", tmp_path / "data" / "d.csv"], capsys)
        text = ('schema_version = 1\n[dataset]\ncsv = "data/d.csv"\n'
                '[training]\nlearning_rate = 0.05\nepochs = 5\n[loss]\nkind = "bce"\n')
        code, _, _ = run(["train", write(tmp_path, text), "--out", tmp_path / "o"], capsys)
        assert code == 0

    @pytest.mark.parametrize("text, match", [
        ("schema_version = 2\n", "schema_version"),
        ("schema_version = 1\n", "'dataset'"),
        ("schema_version = 1\n[dataset]\ntrain_fraction = 0.8\n", "exactly one"),
        ("schema_version = 1\nseeds = 0 0\n[dataset]\n", "line 2"),
        (SMALL + "momentum = 0.5\n", "unknown key"),
        (SMALL.replace("epochs = 5", "epochs = 0"), "epochs"),
        (SMALL + '[loss]\nkind = "alpa"\nvariant = "v9"\n', r"\[loss\]"),
    ])
    def test_config_errors(self, tmp_path, text, match):
        with pytest.raises(ConfigError, match=match):
            load_config(write(tmp_path, text))

    def test_config_error_exit_code(self, tmp_path, capsys):
        code, _, err = run(["train", write(tmp_path, "schema_version = 2\n")], capsys)
        assert code == 2 and err.startswith("config error")


class TestBench:
    def test_single_loss(self, tmp_path, capsys):
        cfg = write(tmp_path, SMALL + '\n[[losses]]\nkind = "ce"\n')
        code, _, err = run(["bench", cfg, "--out", tmp_path], capsys)
        assert code == 2 and "benchmark needs >= 2 losses" in err

    def test_table_and_json(self, tmp_path, capsys):
        cfg = write(tmp_path, SMALL + '\n[[losses]]\nkind = "ce"\n\n[[losses]]\nkind = "alpa"\nvariant = "v2"\n')
        code, out, _ = run(["bench", cfg, "--out", tmp_path / "a"], capsys)
        assert code == 0
        assert "Balanced Accuracy" in out and "alpa-v2" in out
        result = json.loads((tmp_path / "a" / "bench.json").read_text())
        assert [e["label"] for e in result["losses"]] == ["ce", "alpa-v2"]
        assert all(len(e["reports"]) == 2 for e in result["losses"])
        run(["bench", cfg, "--out", tmp_path / "b"], capsys)
        assert (tmp_path / "a" / "bench.json").read_bytes() == (tmp_path / "b" / "bench.json").read_bytes()

    def test_identical_splits(self, tmp_path):
        cfg = load_config(write(tmp_path, SMALL + '\n[[losses]]\nkind = "ce"\n\n[[losses]]\nkind = "bce"\n'))
        result = run_benchmark(cfg)
        a, b = result["losses"]
        for ra, rb in zip(a["reports"], b["reports"]):
            assert ra["class_counts"] == rb["class_counts"] and ra["seed"] == rb["seed"]
