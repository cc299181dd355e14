import json

import numpy as np
import pytest

from imugest.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from imugest.errors import (CheckpointShapeError, CheckpointVersionError,
                            MalformedCheckpointError)
from imugest.model import ModelConfig, init_params
from imugest.numerics import Rng


@pytest.fixture
def saved(tmp_path):
    config = ModelConfig(variant="A", input_dim=6, hidden_sizes=(8, 4),
                         num_classes=10, dropout_rate=0.25, input_relu=True,
                         window_len=30)
    params = init_params(config, Rng(99).derive("init"))
    path = tmp_path / "model.ckpt"
    save_checkpoint(params, config, str(path))
    return params, config, path


def rewrite_header(path, mutate):
    """Load the container, apply ``mutate`` to the parsed header dict, and
    write the file back with the original payload bytes."""
    data = path.read_bytes()
    rest = data[len(MAGIC):]
    newline = rest.find(b"\n")
    header = json.loads(rest[:newline])
    mutate(header)
    new_header = json.dumps(header, sort_keys=True,
                            separators=(",", ":")).encode()
    path.write_bytes(MAGIC + new_header + b"\n" + rest[newline + 1:])


class TestRoundTrip:
    def test_params_bit_identical(self, saved):
        params, config, path = saved
        loaded_params, loaded_config = load_checkpoint(str(path))
        assert loaded_config == config
        for (_, a), (_, b) in zip(params.named_arrays(),
                                  loaded_params.named_arrays()):
            np.testing.assert_array_equal(a, b)

    def test_save_load_save_byte_identical(self, saved, tmp_path):
        _, _, path = saved
        loaded_params, loaded_config = load_checkpoint(str(path))
        second = tmp_path / "again.ckpt"
        save_checkpoint(loaded_params, loaded_config, str(second))
        assert path.read_bytes() == second.read_bytes()

    def test_variant_b_round_trip(self, tmp_path):
        config = ModelConfig.variant_b(window_len=40)
        params = init_params(config, Rng(7))
        path = tmp_path / "b.ckpt"
        save_checkpoint(params, config, str(path))
        loaded_params, loaded_config = load_checkpoint(str(path))
        assert loaded_config == config
        np.testing.assert_array_equal(params.dense_W, loaded_params.dense_W)


class TestLoadErrors:
    def test_truncated_file(self, saved):
        _, _, path = saved
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 2])
        with pytest.raises(MalformedCheckpointError):
            load_checkpoint(str(path))

    def test_missing_magic(self, saved):
        _, _, path = saved
        path.write_bytes(b"not a checkpoint at all")
        with pytest.raises(MalformedCheckpointError):
            load_checkpoint(str(path))

    def test_garbage_header(self, saved):
        _, _, path = saved
        payload = path.read_bytes()[len(MAGIC):]
        newline = payload.find(b"\n")
        path.write_bytes(MAGIC + b"{not json" + payload[newline:])
        with pytest.raises(MalformedCheckpointError):
            load_checkpoint(str(path))

    def test_version_mismatch(self, saved):
        _, _, path = saved
        rewrite_header(path, lambda h: h.update(format_version=99))
        with pytest.raises(CheckpointVersionError):
            load_checkpoint(str(path))

    def test_config_array_shape_mismatch(self, saved):
        # header claims hidden sizes (16, 4) but stored arrays are for (8, 4)
        _, _, path = saved
        rewrite_header(
            path, lambda h: h["config"].update(hidden_sizes=[16, 4]))
        with pytest.raises(CheckpointShapeError):
            load_checkpoint(str(path))

    def test_wrong_kind(self, saved):
        _, _, path = saved
        rewrite_header(path, lambda h: h.update(kind="something_else"))
        with pytest.raises(MalformedCheckpointError):
            load_checkpoint(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(MalformedCheckpointError):
            load_checkpoint(str(tmp_path / "nope.ckpt"))
