"""From labeled recordings to the model's windowed tensor dataset.

Sliding windows, per-channel z-score normalization (statistics fit on the
training side only), optional gravity removal and axis elimination, and
participant-level train/validation splits.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import checkpoint as container
from .errors import ContractViolationError
from .ingest import CHANNEL_NAMES, GestureRecording
from .labels import LABEL_NAMES

DEGENERATE_STD = 1e-9


@dataclass
class Window:
    """One fixed-length model input: values (window_len, channels)."""

    values: np.ndarray
    label: int
    participant: str
    recording_id: str = ""


@dataclass
class WindowedDataset:
    windows: list[Window]
    window_len: int
    step: int
    channel_names: tuple[str, ...] = CHANNEL_NAMES

    def __len__(self) -> int:
        return len(self.windows)

    def values_tensor(self) -> np.ndarray:
        """Stack to (N, window_len, channels)."""
        n_ch = len(self.channel_names)
        if not self.windows:
            return np.zeros((0, self.window_len, n_ch))
        return np.stack([w.values for w in self.windows])

    def label_array(self) -> np.ndarray:
        return np.asarray([w.label for w in self.windows], dtype=np.int64)

    def participants(self) -> set[str]:
        return {w.participant for w in self.windows}


@dataclass
class NormalizationStats:
    """Per-channel population mean/std. Channels whose std falls below
    DEGENERATE_STD are flagged and normalize to zero."""

    mean: np.ndarray
    std: np.ndarray

    @property
    def degenerate(self) -> np.ndarray:
        return self.std < DEGENERATE_STD


def slide_windows(recording: GestureRecording, window_len: int = 250,
                  step: int = 50) -> list[Window]:
    """Cut a recording into windows starting at 0, step, 2*step, ...

    Recordings shorter than window_len yield no windows (with a warning);
    every window inherits the recording's label.
    """
    if window_len < 1 or step < 1:
        raise ContractViolationError("window_len and step must be >= 1")
    n = len(recording)
    if n < window_len:
        warnings.warn(
            f"recording {recording.source_id or '<unnamed>'} has {n} samples, "
            f"shorter than window_len {window_len}; no windows produced",
            stacklevel=2)
        return []
    out = []
    for start in range(0, n - window_len + 1, step):
        out.append(Window(
            values=recording.values[start:start + window_len].copy(),
            label=int(recording.label),
            participant=recording.participant.alias,
            recording_id=recording.source_id,
        ))
    return out


def window_recordings(recordings: list[GestureRecording], window_len: int = 250,
                      step: int = 50) -> WindowedDataset:
    """slide_windows over many recordings, collected into one dataset."""
    windows: list[Window] = []
    for rec in recordings:
        windows.extend(slide_windows(rec, window_len, step))
    return WindowedDataset(windows=windows, window_len=window_len, step=step)


def zscore_fit(dataset: WindowedDataset) -> NormalizationStats:
    """Per-channel mean and population std pooled over every sample of every
    training window."""
    if not dataset.windows:
        raise ContractViolationError("cannot fit normalization on an empty set")
    stacked = dataset.values_tensor()
    flat = stacked.reshape(-1, stacked.shape[-1])
    return NormalizationStats(mean=flat.mean(axis=0), std=flat.std(axis=0))


def normalize_values(values: np.ndarray, stats: NormalizationStats) -> np.ndarray:
    """(v - mean) / std per channel; degenerate channels map to 0."""
    safe_std = np.where(stats.degenerate, 1.0, stats.std)
    scale = np.where(stats.degenerate, 0.0, 1.0 / safe_std)
    return (values - stats.mean) * scale


def zscore_apply(dataset: WindowedDataset,
                 stats: NormalizationStats) -> WindowedDataset:
    if stats.mean.shape[0] != len(dataset.channel_names):
        raise ContractViolationError(
            f"stats cover {stats.mean.shape[0]} channels, dataset has "
            f"{len(dataset.channel_names)}")
    windows = [replace(w, values=normalize_values(w.values, stats))
               for w in dataset.windows]
    return replace(dataset, windows=windows)


def remove_gravity(recording: GestureRecording,
                   head_samples: int = 25) -> GestureRecording:
    """Subtract a constant gravity estimate from the accelerometer channels.

    The estimate is the mean accelerometer vector over the first
    ``head_samples`` rows (the device starts flat and at rest, so that head
    is gravity-dominated). Gyroscope channels are untouched.
    """
    n = min(head_samples, len(recording))
    if n == 0:
        raise ContractViolationError("cannot remove gravity from an empty recording")
    values = recording.values.copy()
    gravity = values[:n, :3].mean(axis=0)
    values[:, :3] -= gravity
    return replace(recording, values=values, times=recording.times.copy())


def drop_axis(dataset: WindowedDataset, axis: str) -> WindowedDataset:
    """Remove one named channel from every window; the model's input_dim
    must shrink to match downstream."""
    if axis not in dataset.channel_names:
        raise ContractViolationError(
            f"unknown channel {axis!r}; have {dataset.channel_names}")
    idx = dataset.channel_names.index(axis)
    keep = [i for i in range(len(dataset.channel_names)) if i != idx]
    windows = [replace(w, values=w.values[:, keep]) for w in dataset.windows]
    names = tuple(n for n in dataset.channel_names if n != axis)
    return replace(dataset, windows=windows, channel_names=names)


def split_by_participant(recordings: list[GestureRecording],
                         validation_aliases: set[str]
                         ) -> tuple[list[GestureRecording], list[GestureRecording]]:
    """Partition recordings so no participant contributes to both sides."""
    present = {r.participant.alias for r in recordings}
    unknown = set(validation_aliases) - present
    if unknown:
        raise ContractViolationError(
            f"validation aliases not in data: {sorted(unknown)}; "
            f"present: {sorted(present)}")
    train = [r for r in recordings if r.participant.alias not in validation_aliases]
    val = [r for r in recordings if r.participant.alias in validation_aliases]
    return train, val


def select_low_variance_participants(recordings: list[GestureRecording],
                                     k: int) -> set[str]:
    """Aliases of the k steadiest participants.

    Score per participant: pool all their samples, take the per-channel
    population variance, average over channels. Ties break toward the
    lexicographically smaller alias.
    """
    by_alias: dict[str, list[np.ndarray]] = {}
    for rec in recordings:
        by_alias.setdefault(rec.participant.alias, []).append(rec.values)
    if k > len(by_alias):
        raise ContractViolationError(
            f"k={k} exceeds participant count {len(by_alias)}")
    scores = []
    for alias, chunks in by_alias.items():
        pooled = np.concatenate(chunks, axis=0)
        scores.append((float(pooled.var(axis=0).mean()), alias))
    scores.sort(key=lambda s: (s[0], s[1]))
    return {alias for _, alias in scores[:k]}


def save_dataset(dataset: WindowedDataset, path: str) -> None:
    """Cache a windowed dataset to disk; round-trips bit-exactly."""
    header = {
        "kind": "windowed_dataset",
        "window_len": dataset.window_len,
        "step": dataset.step,
        "channel_names": list(dataset.channel_names),
        "label_map": {name: i for i, name in enumerate(LABEL_NAMES)},
        "labels": [w.label for w in dataset.windows],
        "participants": [w.participant for w in dataset.windows],
        "recording_ids": [w.recording_id for w in dataset.windows],
    }
    container.write_container(path, header,
                              [("values", dataset.values_tensor())])


def load_dataset(path: str) -> WindowedDataset:
    header, arrays = container.read_container(path)
    if header.get("kind") != "windowed_dataset":
        raise ContractViolationError(
            f"{path}: container holds {header.get('kind')!r}, not a dataset")
    values = arrays["values"]
    windows = [
        Window(values=values[i], label=int(lbl), participant=part,
               recording_id=rid)
        for i, (lbl, part, rid) in enumerate(zip(
            header["labels"], header["participants"], header["recording_ids"]))
    ]
    return WindowedDataset(
        windows=windows,
        window_len=int(header["window_len"]),
        step=int(header["step"]),
        channel_names=tuple(header["channel_names"]),
    )
