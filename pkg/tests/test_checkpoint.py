import numpy as np
import pytest

from caso.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from caso.config import TrainingConfig
from caso.evaluation import evaluate, split_memberships

from conftest import random_memberships


def make(rng):
    return Checkpoint(
        TrainingConfig(dim=3, lam=0.05, measure="cn"),
        {"user_base": rng.normal(size=(7, 3)), "community": rng.normal(size=(4, 3)),
         "user_final": rng.normal(size=(7, 3))},
        {"data_hash": "abc", "best_epoch": "12"},
    )


class TestCheckpoint:
    def test_round_trip_bit_identical(self, tmp_path, rng):
        ck = make(rng)
        save_checkpoint(tmp_path / "m.ckpt", ck)
        back = load_checkpoint(tmp_path / "m.ckpt")
        assert back.config == ck.config
        assert back.meta == ck.meta
        for k in ck.blocks:
            assert back.blocks[k].tobytes() == ck.blocks[k].tobytes()

    def test_layout(self, tmp_path, rng):
        ck = make(rng)
        save_checkpoint(tmp_path / "m.ckpt", ck)
        raw = (tmp_path / "m.ckpt").read_bytes()
        assert raw.startswith(b"CASO1\n")
        body = raw[raw.index(b"\nend\n") + 5:]
        expect = b"".join(ck.blocks[k].astype("<f8").tobytes(order="C") for k in ("user_base", "community", "user_final"))
        assert body == expect

    def test_metrics_identical_after_reload(self, tmp_path, rng):
        ck = make(rng)
        split = split_memberships(random_memberships(rng, 7, 4, p=0.5), 0.6, 0.0, 1)
        save_checkpoint(tmp_path / "m.ckpt", ck)
        back = load_checkpoint(tmp_path / "m.ckpt")
        assert evaluate(ck.user_final, ck.community_emb, split).items() == \
            evaluate(back.user_final, back.community_emb, split).items()

    def test_bad_magic(self, tmp_path):
        (tmp_path / "x").write_bytes(b"NOPE\n")
        with pytest.raises(ValueError, match="magic"):
            load_checkpoint(tmp_path / "x")

    def test_truncated(self, tmp_path, rng):
        save_checkpoint(tmp_path / "m.ckpt", make(rng))
        raw = (tmp_path / "m.ckpt").read_bytes()
        (tmp_path / "t.ckpt").write_bytes(raw[:-8])
        with pytest.raises(ValueError, match="truncated"):
            load_checkpoint(tmp_path / "t.ckpt")
