"""Binary container format for model checkpoints and cached datasets.

Layout: a one-line ASCII magic string, one line of canonical JSON (the text
header: format version, payload kind, array names/shapes, byte order, and
kind-specific metadata such as model dimensions and gate order), then the
raw array data, little-endian float64, concatenated in the header's declared
order. Canonical JSON plus raw bytes make save -> load -> save byte-exact.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile

import numpy as np

from .errors import (CheckpointShapeError, CheckpointVersionError,
                     MalformedCheckpointError)
from .model import LSTMLayerParams, ModelConfig, ModelParams

MAGIC = b"#imugest-container\n"
FORMAT_VERSION = 1
GATE_ORDER = "ifgo"


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_container(path: str, header: dict,
                    arrays: list[tuple[str, np.ndarray]]) -> None:
    """Serialize header + named arrays. The caller's header gains
    'format_version', 'byte_order', 'dtype' and the 'arrays' table."""
    full = dict(header)
    full["format_version"] = FORMAT_VERSION
    full["byte_order"] = "little"
    full["dtype"] = "float64"
    full["arrays"] = [
        {"name": name, "shape": list(arr.shape)}
        for (name, arr) in arrays
    ]
    header_line = json.dumps(full, sort_keys=True, separators=(",", ":"))
    blob = bytearray()
    blob += MAGIC
    blob += header_line.encode("utf-8") + b"\n"
    for _, arr in arrays:
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    atomic_write_bytes(path, bytes(blob))


def read_container(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    """Parse a container; returns (header, arrays by name).

    Raises MalformedCheckpointError for anything unreadable or truncated and
    CheckpointVersionError for a future format version.
    """
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise MalformedCheckpointError(f"{path}: cannot read ({e})") from e
    if not data.startswith(MAGIC):
        raise MalformedCheckpointError(f"{path}: missing container magic")
    rest = data[len(MAGIC):]
    newline = rest.find(b"\n")
    if newline < 0:
        raise MalformedCheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(rest[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise MalformedCheckpointError(f"{path}: bad header ({e})") from e
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format version {version}, supported {FORMAT_VERSION}")
    if header.get("byte_order") != "little" or header.get("dtype") != "float64":
        raise MalformedCheckpointError(f"{path}: unsupported encoding")
    payload = rest[newline + 1:]
    arrays: dict[str, np.ndarray] = {}
    pos = 0
    for entry in header.get("arrays", []):
        shape = tuple(int(s) for s in entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        nbytes = n * 8
        if pos + nbytes > len(payload):
            raise MalformedCheckpointError(
                f"{path}: truncated data for array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(
            payload[pos:pos + nbytes], dtype="<f8").reshape(shape).copy()
        pos += nbytes
    if pos != len(payload):
        raise MalformedCheckpointError(
            f"{path}: {len(payload) - pos} trailing bytes after declared arrays")
    return header, arrays


def _expected_shapes(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    shapes: list[tuple[str, tuple[int, ...]]] = []
    for idx, (d, h) in enumerate(zip(config.layer_input_sizes(),
                                     config.hidden_sizes)):
        shapes.append((f"layer{idx}.W", (4 * h, d)))
        shapes.append((f"layer{idx}.U", (4 * h, h)))
        shapes.append((f"layer{idx}.b", (4 * h,)))
    shapes.append(("dense_W", (config.num_classes, config.hidden_sizes[-1])))
    shapes.append(("dense_b", (config.num_classes,)))
    return shapes


def save_checkpoint(params: ModelParams, config: ModelConfig, path: str) -> None:
    """Write params + config; round-trips bit-exactly through load_checkpoint."""
    header = {
        "kind": "checkpoint",
        "gate_order": GATE_ORDER,
        "config": dataclasses.asdict(config),
    }
    write_container(path, header, params.named_arrays())


def load_checkpoint(path: str) -> tuple[ModelParams, ModelConfig]:
    """Read a checkpoint; arrays come back bit-identical to what was saved."""
    header, arrays = read_container(path)
    if header.get("kind") != "checkpoint":
        raise MalformedCheckpointError(
            f"{path}: container holds {header.get('kind')!r}, not a checkpoint")
    if header.get("gate_order") != GATE_ORDER:
        raise MalformedCheckpointError(
            f"{path}: unsupported gate order {header.get('gate_order')!r}")
    cfg_dict = header.get("config")
    if not isinstance(cfg_dict, dict):
        raise MalformedCheckpointError(f"{path}: header lacks a config")
    try:
        config = ModelConfig(**cfg_dict)
    except (TypeError, ValueError) as e:
        raise MalformedCheckpointError(f"{path}: bad config ({e})") from e

    expected = _expected_shapes(config)
    for name, shape in expected:
        if name not in arrays:
            raise CheckpointShapeError(f"{path}: missing array {name!r}")
        if arrays[name].shape != shape:
            raise CheckpointShapeError(
                f"{path}: array {name!r} has shape {arrays[name].shape}, "
                f"config implies {shape}")
    extra = set(arrays) - {name for name, _ in expected}
    if extra:
        raise CheckpointShapeError(
            f"{path}: unexpected arrays {sorted(extra)}")

    layers = [
        LSTMLayerParams(W=arrays[f"layer{i}.W"], U=arrays[f"layer{i}.U"],
                        b=arrays[f"layer{i}.b"])
        for i in range(len(config.hidden_sizes))
    ]
    params = ModelParams(layers=layers, dense_W=arrays["dense_W"],
                         dense_b=arrays["dense_b"])
    return params, config
