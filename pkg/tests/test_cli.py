import io

import numpy as np
import pytest

from caso.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from caso.cli import main
from caso.config import TrainingConfig
from caso.data import load_bundle, write_pairs


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


def keyvals(text, prefix):
    rows = {}
    for line in text.splitlines():
        if line.startswith(prefix) and " = " in line:
            k, v = line.split(" = ", 1)
            rows[k[len(prefix):]] = v
    return rows


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("ds")
    code, _ = run(["synth", "--n", "120", "--blocks", "3", "--p-in", "0.3", "--p-out", "0.01", "--seed", "7", "--out", str(d)])
    assert code == 0
    return d


def data_args(d):
    return ["--graph", str(d / "graph.txt"), "--memberships", str(d / "memberships.txt")]


class TestCli:
    def test_synth_then_stats(self, tmp_path):
        assert run(["synth", "--n", "400", "--blocks", "4", "--p-in", "0.3", "--p-out", "0.01",
                    "--seed", "7", "--out", str(tmp_path)])[0] == 0
        code, text = run(["stats"] + data_args(tmp_path))
        assert code == 0
        s = keyvals(text, "stat.")
        assert s["users"] == "400"
        assert float(s["ac_intra"]) > float(s["ac_inter"])

    def test_train_is_deterministic(self, dataset, tmp_path):
        args = ["train"] + data_args(dataset) + ["--seed", "1", "--epochs", "15", "--dim", "8"]
        c1, t1 = run(args + ["--out", str(tmp_path / "a")])
        c2, t2 = run(args + ["--out", str(tmp_path / "b")])
        assert c1 == c2 == 0
        assert (tmp_path / "a" / "model.ckpt").read_bytes() == (tmp_path / "b" / "model.ckpt").read_bytes()
        assert t1 == t2
        assert (tmp_path / "a" / "train_log.tsv").exists()

    def test_train_echoes_config_and_metrics(self, dataset, tmp_path):
        code, text = run(["train"] + data_args(dataset) + ["--epochs", "3", "--dim", "8", "--lambda", "0.05",
                                                           "--measure", "si", "--no-kl", "--K", "2", "--out", str(tmp_path)])
        assert code == 0
        cfg = keyvals(text, "config.")
        assert cfg["lam"] == "0.05" and cfg["measure"] == "si" and cfg["no_kl"] == "True" and cfg["dim"] == "8"
        assert set(keyvals(text, "metric.")) == {"recall@2", "ndcg@2"}
        assert (tmp_path / "config.txt").read_text().count("\n") == len(cfg)

    def test_flags_override_config_file(self, dataset, tmp_path):
        (tmp_path / "c.txt").write_text("gamma = 0.9\ntheta = 0.2\n")
        code, text = run(["train"] + data_args(dataset) + ["--config", str(tmp_path / "c.txt"), "--gamma", "0.1",
                                                           "--epochs", "1", "--dim", "4", "--out", str(tmp_path / "o")])
        assert code == 0
        cfg = keyvals(text, "config.")
        assert cfg["gamma"] == "0.1" and cfg["theta"] == "0.2"

    def test_evaluate_reproduces_training_metrics(self, dataset, tmp_path):
        _, t_train = run(["train"] + data_args(dataset) + ["--epochs", "5", "--dim", "8", "--out", str(tmp_path)])
        code, t_eval = run(["evaluate"] + data_args(dataset) + ["--checkpoint", str(tmp_path / "model.ckpt")])
        assert code == 0
        assert keyvals(t_eval, "metric.") == keyvals(t_train, "metric.")

    def test_evaluate_perfect_model(self, tmp_path):
        users = [f"u{i}" for i in range(30)]
        write_pairs(tmp_path / "g.txt", [(users[i], users[i + 1]) for i in range(29)])
        write_pairs(tmp_path / "y.txt", [(u, f"c{i % 3}") for i, u in enumerate(users)])
        bundle = load_bundle(tmp_path / "g.txt", tmp_path / "y.txt")
        C = np.eye(3)
        U = np.zeros((30, 3))
        for i, k in bundle.memberships.pairs():
            U[i, k] = 1.0
        cfg = TrainingConfig(dim=3)
        save_checkpoint(tmp_path / "m.ckpt", Checkpoint(
            cfg, {"user_base": U, "community": C, "user_final": U}, {"data_hash": bundle.content_hash}))
        code, text = run(["evaluate", "--graph", str(tmp_path / "g.txt"), "--memberships", str(tmp_path / "y.txt"),
                          "--checkpoint", str(tmp_path / "m.ckpt"), "--K", "1", "--K", "3"])
        assert code == 0
        metrics = keyvals(text, "metric.")
        assert len(metrics) == 4 and all(float(v) == 1.0 for v in metrics.values())

    def test_evaluate_rejects_other_data(self, dataset, tmp_path):
        run(["train"] + data_args(dataset) + ["--epochs", "1", "--dim", "4", "--out", str(tmp_path)])
        ck = load_checkpoint(tmp_path / "model.ckpt")
        ck.meta["data_hash"] = "0" * 64
        save_checkpoint(tmp_path / "model.ckpt", ck)
        code, _ = run(["evaluate"] + data_args(dataset) + ["--checkpoint", str(tmp_path / "model.ckpt")])
        assert code == 1

    def test_ablate_rows(self, dataset):
        code, text = run(["ablate"] + data_args(dataset) + ["--epochs", "2", "--dim", "4", "--K", "1"])
        assert code == 0
        keys = keyvals(text, "metric.")
        for name in ("full", "no_smm", "no_sca", "no_uce", "no_fme", "no_kl"):
            assert f"{name}.recall@1" in keys

    def test_sweep_rows(self, dataset):
        code, text = run(["sweep"] + data_args(dataset) + ["--epochs", "2", "--dim", "4", "--K", "1",
                                                           "--param", "beta", "--grid", "0.2,1.0"])
        assert code == 0
        assert set(keyvals(text, "metric.")) == {"beta=0.2.recall@1", "beta=0.2.ndcg@1",
                                                 "beta=1.0.recall@1", "beta=1.0.ndcg@1"}

    def test_cross_validate(self, dataset):
        code, text = run(["cross-validate"] + data_args(dataset) + ["--epochs", "2", "--dim", "4", "--K", "1",
                                                                    "--folds", "3", "--trials", "2"])
        assert code == 0
        keys = keyvals(text, "metric.")
        assert "mean.recall@1" in keys and "t1f2.ndcg@1" in keys

    def test_missing_file(self, tmp_path, capsys):
        code, _ = run(["stats", "--graph", str(tmp_path / "nope"), "--memberships", str(tmp_path / "nope")])
        assert code != 0
        assert "error" in capsys.readouterr().err

    def test_invalid_hyperparameter(self, dataset, tmp_path, capsys):
        code, _ = run(["train"] + data_args(dataset) + ["--alpha", "0.4", "--out", str(tmp_path)])
        assert code != 0
        assert "alpha" in capsys.readouterr().err

    def test_unknown_flag(self):
        with pytest.raises(SystemExit) as exc:
            run(["train", "--frobnicate"])
        assert exc.value.code != 0
