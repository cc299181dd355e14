"""Mini-batch training, evaluation metrics, and streaming inference."""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import ContractViolationError
from .ingest import GestureRecording, SensorSample
from .labels import LABEL_NAMES
from .model import (ModelConfig, ModelParams, backward_batch, forward_batch,
                    init_params)
from .numerics import PROB_FLOOR, AdamState, Rng, adam_update
from .preprocess import (NormalizationStats, WindowedDataset, normalize_values,
                         slide_windows)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 50
    learning_rate: float = 0.025
    epochs: int = 10
    shuffle_seed: int = 0
    variant: str = "A"
    dropout_rate: float = 0.5
    early_stop_patience: int | None = None
    target_val_acc: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ContractViolationError("batch_size and epochs must be >= 1")


@dataclass
class EpochMetrics:
    """Per-epoch scalars. Training loss/accuracy come from the train-mode
    forward passes (dropout active); validation numbers are inference-mode."""

    epoch: int
    train_loss: float
    train_acc: float
    val_window_acc: float
    val_gesture_acc: float


@dataclass
class ConfusionMatrix:
    """Rows are true labels, columns predictions; accuracy = trace/total."""

    counts: np.ndarray
    label_names: tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        total = self.total
        return float(np.trace(self.counts)) / total if total else 0.0

    def rate(self, true_name: str, pred_name: str) -> float:
        """Fraction of the true class predicted as pred (0 if class unseen)."""
        i = self.label_names.index(true_name)
        j = self.label_names.index(pred_name)
        row = self.counts[i].sum()
        return float(self.counts[i, j]) / row if row else 0.0

    def mean_off_diagonal_rate(self) -> float:
        """Average per-class misclassification mass off the diagonal."""
        rates = []
        for i, row in enumerate(self.counts):
            total = row.sum()
            if total:
                rates.append(float(row.sum() - row[i]) / total)
        return float(np.mean(rates)) if rates else 0.0

    def to_csv(self, path: str) -> None:
        lines = ["true\\predicted," + ",".join(self.label_names)]
        for name, row in zip(self.label_names, self.counts):
            lines.append(name + "," + ",".join(str(int(v)) for v in row))
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")


@dataclass
class TrainResult:
    best_params: ModelParams
    final_params: ModelParams
    metrics: list[EpochMetrics]
    best_epoch: int


class StreamEmission(NamedTuple):
    timestamp_ms: int
    label: int
    confidence: float


def _class_names(num_classes: int) -> tuple[str, ...]:
    if num_classes == len(LABEL_NAMES):
        return LABEL_NAMES
    return tuple(str(i) for i in range(num_classes))


def predict_probs(params: ModelParams, config: ModelConfig, values: np.ndarray,
                  chunk: int = 200) -> np.ndarray:
    """Inference-mode class probabilities for an (N, T, C) stack of windows."""
    out = []
    for start in range(0, len(values), chunk):
        probs, _ = forward_batch(values[start:start + chunk], params, config,
                                 mode="infer")
        out.append(probs)
    return np.concatenate(out, axis=0) if out else \
        np.zeros((0, config.num_classes))


def _window_loss_acc(probs: np.ndarray, targets: np.ndarray) -> tuple[float, float]:
    picked = np.clip(probs[np.arange(len(targets)), targets], PROB_FLOOR, None)
    loss = float(-np.log(picked).mean())
    acc = float((probs.argmax(axis=1) == targets).mean())
    return loss, acc


def _gesture_vote_acc(probs: np.ndarray, targets: np.ndarray,
                      recording_ids: list[str]) -> float:
    """Soft majority vote: sum each recording's window probabilities, then
    argmax (ties resolve to the lowest class index)."""
    sums: dict[str, np.ndarray] = {}
    labels: dict[str, int] = {}
    for rid, p, y in zip(recording_ids, probs, targets):
        if rid in sums:
            sums[rid] = sums[rid] + p
        else:
            sums[rid] = p.copy()
            labels[rid] = int(y)
    if not sums:
        return float("nan")
    correct = sum(1 for rid, s in sums.items()
                  if int(np.argmax(s)) == labels[rid])
    return correct / len(sums)


def train(train_set: WindowedDataset, val_set: WindowedDataset,
          model_config: ModelConfig, train_config: TrainConfig,
          initial_params: ModelParams | None = None) -> TrainResult:
    """Run the mini-batch loop: per epoch a seeded shuffle, batches of
    batch_size (last partial batch kept), the batch-mean gradient fed to one
    Adam step per parameter, then validation metrics. Returns the
    best-validation and final parameters plus the metric history.

    When ``initial_params`` is omitted, weights are drawn from the "init"
    stream of the shuffle seed. Early exits: ``target_val_acc`` stops once
    validation window accuracy reaches the target; ``early_stop_patience``
    stops after that many epochs without a new best.
    """
    if not train_set.windows:
        raise ContractViolationError("training set is empty")
    n_ch = len(train_set.channel_names)
    if n_ch != model_config.input_dim:
        raise ContractViolationError(
            f"dataset has {n_ch} channels but model input_dim is "
            f"{model_config.input_dim}")
    if train_set.window_len != model_config.window_len:
        raise ContractViolationError(
            f"dataset window_len {train_set.window_len} != model "
            f"{model_config.window_len}")

    X = train_set.values_tensor()
    y = train_set.label_array()
    Xv = val_set.values_tensor()
    yv = val_set.label_array()
    val_rids = [w.recording_id for w in val_set.windows]

    if initial_params is None:
        initial_params = init_params(
            model_config, Rng(train_config.shuffle_seed).derive("init"))
    params = initial_params.copy()
    adam: dict[str, AdamState] = {
        name: AdamState.for_param(arr, train_config.learning_rate,
                                  train_config.beta1, train_config.beta2,
                                  train_config.epsilon)
        for name, arr in params.named_arrays()
    }
    master = Rng(train_config.shuffle_seed)
    shuffle_rng = master.derive("shuffle")
    dropout_rng = master.derive("dropout")

    metrics: list[EpochMetrics] = []
    best_acc = -1.0
    best_epoch = -1
    best_params = params.copy()
    stale = 0
    n = len(X)
    bs = train_config.batch_size

    for epoch in range(1, train_config.epochs + 1):
        perm = shuffle_rng.permutation(n)
        loss_sum = 0.0
        hit_sum = 0
        for start in range(0, n, bs):
            idx = perm[start:start + bs]
            xb, yb = X[idx], y[idx]
            probs, cache = forward_batch(xb, params, model_config,
                                         mode="train", rng=dropout_rng)
            grads = backward_batch(cache, yb, params, model_config,
                                   scale=1.0 / len(idx))
            for (name, p_arr), (_, g_arr) in zip(params.named_arrays(),
                                                 grads.named_arrays()):
                new_p, adam[name] = adam_update(p_arr, g_arr, adam[name])
                p_arr[...] = new_p
            picked = np.clip(probs[np.arange(len(idx)), yb], PROB_FLOOR, None)
            loss_sum += float(-np.log(picked).sum())
            hit_sum += int((probs.argmax(axis=1) == yb).sum())

        train_loss = loss_sum / n
        train_acc = hit_sum / n
        if len(Xv):
            val_probs = predict_probs(params, model_config, Xv)
            _, val_window_acc = _window_loss_acc(val_probs, yv)
            val_gesture_acc = _gesture_vote_acc(val_probs, yv, val_rids)
        else:
            val_window_acc = float("nan")
            val_gesture_acc = float("nan")
        metrics.append(EpochMetrics(epoch, train_loss, train_acc,
                                    val_window_acc, val_gesture_acc))

        if len(Xv) and val_window_acc > best_acc:
            best_acc = val_window_acc
            best_epoch = epoch
            best_params = params.copy()
            stale = 0
        else:
            stale += 1

        if train_config.target_val_acc is not None and len(Xv) \
                and val_window_acc >= train_config.target_val_acc:
            break
        if train_config.early_stop_patience is not None \
                and stale >= train_config.early_stop_patience:
            break

    if best_epoch < 0:  # no validation data: final weights are the result
        best_params = params.copy()
        best_epoch = metrics[-1].epoch
    return TrainResult(best_params=best_params, final_params=params,
                       metrics=metrics, best_epoch=best_epoch)


def evaluate(params: ModelParams, config: ModelConfig,
             dataset: WindowedDataset,
             label_names: tuple[str, ...] | None = None
             ) -> tuple[ConfusionMatrix, float]:
    """Inference-mode predictions for every window, tallied into a confusion
    matrix; accuracy is exactly trace/total."""
    if not dataset.windows:
        raise ContractViolationError("cannot evaluate an empty dataset")
    names = label_names or _class_names(config.num_classes)
    probs = predict_probs(params, config, dataset.values_tensor())
    preds = probs.argmax(axis=1)
    targets = dataset.label_array()
    k = config.num_classes
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (targets, preds), 1)
    cm = ConfusionMatrix(counts=counts, label_names=names)
    return cm, cm.accuracy


def gesture_accuracy_majority(params: ModelParams, config: ModelConfig,
                              recordings: list[GestureRecording],
                              window_len: int = 250, step: int = 50,
                              stats: NormalizationStats | None = None) -> float:
    """Per-gesture accuracy with soft voting: each recording's windows vote
    with their summed probability vectors. Recordings too short to yield a
    window are excluded (with a warning)."""
    total = 0
    correct = 0
    skipped = 0
    for rec in recordings:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            windows = slide_windows(rec, window_len, step)
        if not windows:
            skipped += 1
            continue
        values = np.stack([w.values for w in windows])
        if stats is not None:
            values = normalize_values(values, stats)
        probs = predict_probs(params, config, values)
        pred = int(np.argmax(probs.sum(axis=0)))
        total += 1
        correct += int(pred == int(rec.label))
    if skipped:
        warnings.warn(f"{skipped} recordings shorter than window_len "
                      f"{window_len} were excluded", stacklevel=2)
    if total == 0:
        raise ContractViolationError("no recording yielded a window")
    return correct / total


def stream_infer(params: ModelParams, config: ModelConfig,
                 stats: NormalizationStats,
                 sample_stream: Iterable[SensorSample],
                 step: int = 50,
                 channel_indices: tuple[int, ...] | None = None
                 ) -> Iterator[StreamEmission]:
    """Classify a live sample stream with a rolling window.

    Nothing is emitted until window_len samples have arrived; afterwards an
    emission follows every ``step`` new samples, reproducing exactly the
    batch sliding-window positions 0, step, 2*step, ... For models trained
    with an eliminated axis, ``channel_indices`` selects the surviving
    columns of each 6-value sample before normalization.
    """
    if step < 1:
        raise ContractViolationError("step must be >= 1")
    buffer: deque[tuple[int, tuple[float, ...]]] = deque(maxlen=config.window_len)
    seen = 0
    for sample in sample_stream:
        buffer.append((sample.t, sample.values))
        seen += 1
        if seen < config.window_len or (seen - config.window_len) % step != 0:
            continue
        window = np.asarray([v for _, v in buffer], dtype=np.float64)
        if channel_indices is not None:
            window = window[:, list(channel_indices)]
        window = normalize_values(window, stats)
        probs, _ = forward_batch(window[None], params, config, mode="infer")
        label = int(np.argmax(probs[0]))
        yield StreamEmission(timestamp_ms=sample.t, label=label,
                             confidence=float(probs[0, label]))
