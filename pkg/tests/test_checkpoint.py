"""Checkpoint files must round-trip named tensors bitwise."""

import numpy as np
import pytest

from simxfer.checkpoint import load_checkpoint, save_checkpoint
from simxfer.errors import DataError


def test_round_trip_is_bitwise(tmp_path, rng):
    tensors = {
        "enc.fw.w_input": rng.normal(size=(4, 3)) * 1e-7,
        "enc.fw.b_input": rng.normal(size=4) * 1e3,
        "wem.matrix": rng.normal(size=(5, 2)),
        "scalar_value": np.float64(0.1 + 0.2),
        "awkward": np.array([np.pi, -0.0, 1e-308, 1e308]),
    }
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, tensors)
    loaded = load_checkpoint(path)
    assert set(loaded) == set(tensors)
    for name, arr in tensors.items():
        original = np.asarray(arr, dtype=np.float64)
        assert loaded[name].shape == original.shape
        assert np.array_equal(loaded[name].view(np.uint64), original.view(np.uint64))


def test_header_is_checked(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_text("something else\n")
    with pytest.raises(DataError):
        load_checkpoint(path)


def test_malformed_entry(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_text("simxfer-checkpoint 1\nname 2,2\nnot hex floats\n")
    with pytest.raises(DataError):
        load_checkpoint(path)


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "absent.ckpt")


def test_model_snapshot_round_trip(tmp_path):
    from synthetic import make_model

    model = make_model(kind="bilstm-avg", hidden=3, dim=3, bins=5, seed=9)
    snapshot = model.snapshot()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, snapshot)
    loaded = load_checkpoint(path)
    model.restore(loaded)
    for name, tensor in model.named_tensors().items():
        assert np.array_equal(tensor.values, snapshot[name])
