"""Checkpoint binary format: round trips, corruption detection,
and kind/config guards."""

import os

import numpy as np
import pytest

from causalkg.checkpoint import (
    Checkpoint,
    atomic_write_bytes,
    config_digest,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from causalkg.errors import CheckpointError
from causalkg.numeric import AdamState, adam_init, make_rng
from causalkg.vocab import Vocabulary


def sample_checkpoint(kind="base", with_opt=True):
    rng = make_rng(3)
    params = {
        "entity": rng.normal(size=(6, 4)),
        "relation": rng.normal(size=(3, 4)),
    }
    opt = None
    if with_opt:
        opt = adam_init(params)
        opt.step = 17
        opt.m["entity"][0, 0] = 0.25
    return Checkpoint(
        kind=kind,
        config={"model": {"dim": 4}, "train": {"lr": 0.01, "epochs": 9}},
        vocab=Vocabulary(entities=("a", "b", "type/X"), relations=("causes",)),
        params=params,
        opt_state=opt,
        epoch=9,
        val_mrr=0.625,
    )


class TestRoundTrip:
    def test_fields_survive_bit_for_bit(self):
        ckpt = sample_checkpoint()
        again = decode_checkpoint(encode_checkpoint(ckpt))
        assert again.kind == ckpt.kind
        assert again.config == ckpt.config
        assert again.vocab == ckpt.vocab
        assert again.epoch == 9
        assert again.val_mrr == 0.625
        assert set(again.params) == set(ckpt.params)
        for name in ckpt.params:
            assert again.params[name].tobytes() == ckpt.params[name].tobytes()
        assert again.opt_state.step == 17
        assert (
            again.opt_state.m["entity"].tobytes()
            == ckpt.opt_state.m["entity"].tobytes()
        )

    def test_missing_optimizer_state_round_trips_as_none(self):
        ckpt = sample_checkpoint(with_opt=False)
        again = decode_checkpoint(encode_checkpoint(ckpt))
        assert again.opt_state is None

    def test_encoding_is_deterministic(self):
        a = encode_checkpoint(sample_checkpoint())
        b = encode_checkpoint(sample_checkpoint())
        assert a == b

    def test_file_round_trip(self, tmp_path):
        path = str(tmp_path / "model.ckpt")
        ckpt = sample_checkpoint(kind="hyper")
        save_checkpoint(path, ckpt)
        again = load_checkpoint(path, expect_kind="hyper")
        assert again.config == ckpt.config
        assert again.params["entity"].tobytes() == ckpt.params["entity"].tobytes()


class TestCorruptionDetection:
    def test_every_single_bit_flip_in_a_prefix_is_caught(self):
        data = bytearray(encode_checkpoint(sample_checkpoint()))
        for pos in range(0, len(data) - 4, 37):
            mutated = bytearray(data)
            mutated[pos] ^= 0x10
            with pytest.raises(CheckpointError, match="checksum"):
                decode_checkpoint(bytes(mutated))

    def test_truncation_is_caught(self):
        data = encode_checkpoint(sample_checkpoint())
        for cut in (1, 10, len(data) // 2, len(data) - 1):
            with pytest.raises(CheckpointError):
                decode_checkpoint(data[:cut])

    def test_trailing_garbage_is_caught(self):
        data = encode_checkpoint(sample_checkpoint())
        with pytest.raises(CheckpointError):
            decode_checkpoint(data + b"\x00")

    def test_empty_and_foreign_files_are_rejected(self):
        with pytest.raises(CheckpointError):
            decode_checkpoint(b"")
        with pytest.raises(CheckpointError):
            decode_checkpoint(b"PK\x03\x04 not a checkpoint at all, just bytes")


class TestGuards:
    def test_kind_mismatch_is_reported(self):
        data = encode_checkpoint(sample_checkpoint(kind="base"))
        with pytest.raises(CheckpointError, match="expected a hyper checkpoint"):
            decode_checkpoint(data, expect_kind="hyper")

    def test_digest_binds_the_config(self):
        a = config_digest({"x": 1, "y": [1, 2]})
        b = config_digest({"y": [1, 2], "x": 1})
        c = config_digest({"x": 1, "y": [2, 1]})
        assert a == b
        assert a != c
        assert len(a) == 64

    def test_load_propagates_missing_file_as_oserror(self, tmp_path):
        with pytest.raises(OSError):
            load_checkpoint(str(tmp_path / "absent.ckpt"))


class TestAtomicWrite:
    def test_writes_and_replaces(self, tmp_path):
        path = str(tmp_path / "out.bin")
        atomic_write_bytes(path, b"first")
        atomic_write_bytes(path, b"second")
        with open(path, "rb") as handle:
            assert handle.read() == b"second"

    def test_leaves_no_temp_files_behind(self, tmp_path):
        path = str(tmp_path / "out.bin")
        atomic_write_bytes(path, b"payload")
        assert sorted(os.listdir(tmp_path)) == ["out.bin"]


class TestScoreStability:
    def test_loaded_params_score_identically(self, tmp_path):
        from causalkg.basemodels import BaseModelSpec, score_batch

        spec = BaseModelSpec("distmult", 4)
        ckpt = sample_checkpoint()
        path = str(tmp_path / "m.ckpt")
        save_checkpoint(path, ckpt)
        loaded = load_checkpoint(path)
        h, r, t = np.array([0, 1]), np.array([0, 0]), np.array([2, 1])
        before = score_batch(spec, ckpt.params, h, r, t)
        after = score_batch(spec, loaded.params, h, r, t)
        assert before.tobytes() == after.tobytes()
