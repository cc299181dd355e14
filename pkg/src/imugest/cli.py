"""Command-line entry point: synth, train, eval, and infer subcommands.

Every file-producing command writes a ``manifest.json`` into its output
directory before anything else, recording the resolved configuration,
seeds, paths and tool version needed to reproduce the run. Exit codes:
0 success, 1 data/model error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import __version__
from .checkpoint import atomic_write_bytes, load_checkpoint, save_checkpoint
from .errors import (CheckpointError, ContractViolationError, CorruptFileError,
                     EmptySegmentError)
from .ingest import CHANNEL_NAMES, parse_sensor_csv, reject_corrupt, segment_recordings
from .labels import LABEL_NAMES, GestureLabel
from .model import ModelConfig, init_params
from .numerics import Rng
from .preprocess import (NormalizationStats, drop_axis, remove_gravity,
                         split_by_participant, select_low_variance_participants,
                         window_recordings, zscore_apply, zscore_fit)
from .synth import SynthConfig, generate_dataset
from .training import (EpochMetrics, TrainConfig, evaluate, predict_probs,
                       stream_infer, train, _gesture_vote_acc)

VARIANT_DEFAULT_LR = {"A": 0.025, "B": 0.001}


class _Cmd:
    """Subparser wrapper that records argument dests for config-file merging."""

    def __init__(self, sub, name: str, help_text: str):
        self.name = name
        self.parser = sub.add_parser(name, help=help_text)
        self.dests: set[str] = set()
        self.add("--config", type=str, default=None,
                 help="JSON file of flag defaults (explicit flags win)")

    def add(self, *args, **kwargs):
        action = self.parser.add_argument(*args, **kwargs)
        self.dests.add(action.dest)
        return action


def _build_parser(file_defaults: dict | None = None,
                  for_command: str | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imugest",
        description="IMU gesture recognition: synthesize, train, evaluate, infer")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    synth = _Cmd(sub, "synth", "generate a synthetic gesture dataset")
    synth.add("--out", required=True, help="output dataset directory")
    synth.add("--participants", type=int, default=4)
    synth.add("--sessions", type=int, default=10,
              help="sessions per participant")
    synth.add("--seed", type=int, default=0)
    synth.add("--sample-rate", type=float, default=100.0)
    synth.add("--duration", type=float, default=6.12,
              help="mean gesture duration, seconds")
    synth.add("--duration-jitter", type=float, default=0.12)
    synth.add("--noise-acc", type=float, default=0.04,
              help="accelerometer white noise std, m/s^2")
    synth.add("--noise-gyro", type=float, default=0.02,
              help="gyroscope white noise std, rad/s")
    synth.add("--amplitude", type=float, default=0.12,
              help="gesture size scale, meters")
    synth.add("--speed-warp", type=float, default=0.25)
    synth.add("--rotation-max", type=float, default=0.25)

    tr = _Cmd(sub, "train", "train a model on a dataset directory")
    tr.add("--data", required=True, help="dataset directory")
    tr.add("--out", required=True, help="output directory")
    tr.add("--variant", choices=("A", "B"), default="A")
    tr.add("--lr", type=float, default=None,
           help="learning rate (default 0.025 for A, 0.001 for B)")
    tr.add("--batch", type=int, default=50)
    tr.add("--epochs", type=int, default=30)
    tr.add("--dropout", type=float, default=0.5)
    tr.add("--seed", type=int, default=0)
    tr.add("--val-aliases", type=str, default="",
           help="comma-separated validation participants")
    tr.add("--limited-k", type=int, default=None,
           help="keep only the k lowest-variance training participants")
    tr.add("--window", type=int, default=250)
    tr.add("--step", type=int, default=50)
    tr.add("--clock-offset", type=int, default=0,
           help="sensor-to-event clock offset, ms")
    tr.add("--remove-gravity", action="store_true")
    tr.add("--gravity-head", type=int, default=25,
           help="samples used for the gravity estimate")
    tr.add("--drop-axis", type=str, default=None,
           help="channel name to eliminate (e.g. acc_z)")
    tr.add("--patience", type=int, default=None,
           help="early-stop patience, epochs")
    tr.add("--target-val-acc", type=float, default=None,
           help="stop once validation window accuracy reaches this")

    ev = _Cmd(sub, "eval", "evaluate a trained model on a dataset")
    ev.add("--model", required=True,
           help="training output directory (checkpoint + preprocess.json)")
    ev.add("--data", required=True, help="dataset directory")
    ev.add("--out", required=True, help="output directory for confusion.csv")
    ev.add("--val-aliases", type=str, default="",
           help="restrict to these participants (default: all)")
    ev.add("--checkpoint-name", type=str, default="checkpoint_best.ckpt")

    inf = _Cmd(sub, "infer", "stream classifications for a sensors.csv")
    inf.add("--model", required=True,
            help="training output directory (checkpoint + preprocess.json)")
    inf.add("--input", required=True, help="sensors.csv to classify")
    inf.add("--step", type=int, default=None,
            help="emission stride in samples (default: the model's)")
    inf.add("--checkpoint-name", type=str, default="checkpoint_best.ckpt")

    commands = {c.name: c for c in (synth, tr, ev, inf)}
    if file_defaults and for_command in commands:
        cmd = commands[for_command]
        unknown = set(file_defaults) - cmd.dests
        if unknown:
            parser.error(
                f"unknown keys in --config for {for_command}: {sorted(unknown)}")
        cmd.parser.set_defaults(**file_defaults)
    return parser


def _parse_args(argv: list[str]) -> argparse.Namespace:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            with open(args.config, "r", encoding="utf-8") as f:
                file_defaults = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            parser.error(f"cannot read --config {args.config}: {e}")
        if not isinstance(file_defaults, dict):
            parser.error(f"--config {args.config} must hold a JSON object")
        parser = _build_parser(file_defaults, args.command)
        args = parser.parse_args(argv)
    return args


def _write_json(path: str, payload: dict) -> None:
    atomic_write_bytes(
        path, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode())


def _write_manifest(out_dir: str, command: str, args: argparse.Namespace,
                    inputs: list[str], outputs: list[str]) -> None:
    config = {k: v for k, v in sorted(vars(args).items())
              if k not in ("command", "func", "config")}
    _write_json(os.path.join(out_dir, "manifest.json"), {
        "command": command,
        "tool_version": __version__,
        "config": config,
        "inputs": inputs,
        "outputs": outputs,
    })


def cmd_synth(args) -> int:
    config = SynthConfig(
        sample_rate=args.sample_rate,
        duration_mean=args.duration,
        duration_jitter=args.duration_jitter,
        noise_std_acc=args.noise_acc,
        noise_std_gyro=args.noise_gyro,
        amplitude=args.amplitude,
        speed_warp=args.speed_warp,
        rotation_max=args.rotation_max,
        seed=args.seed,
    )
    os.makedirs(args.out, exist_ok=True)
    _write_manifest(args.out, "synth", args, [], [args.out])
    pairs = generate_dataset(config, args.participants, args.sessions, args.out)
    print(f"wrote {len(pairs)} session pairs under {args.out}")
    return 0


def _load_recordings(data_dir: str, clock_offset: int,
                     gravity: bool, gravity_head: int):
    accepted, report = reject_corrupt(data_dir)
    if len(report):
        print(report.summary(), file=sys.stderr)
    if not accepted:
        print(f"error: no usable sessions in {data_dir}", file=sys.stderr)
        return None
    recordings = []
    for session in accepted:
        try:
            recs = segment_recordings(session.trace, session.events, clock_offset)
        except EmptySegmentError as e:
            print(f"skipping {session.sensors_path}: {e}", file=sys.stderr)
            continue
        recordings.extend(recs)
    if gravity:
        recordings = [remove_gravity(r, gravity_head) for r in recordings]
    if not recordings:
        print(f"error: no recordings segmented from {data_dir}", file=sys.stderr)
        return None
    return recordings


def _apply_channel_selection(dataset, channel_names: tuple[str, ...]):
    for name in [n for n in dataset.channel_names if n not in channel_names]:
        dataset = drop_axis(dataset, name)
    return dataset


def cmd_train(args) -> int:
    recordings = _load_recordings(args.data, args.clock_offset,
                                  args.remove_gravity, args.gravity_head)
    if recordings is None:
        return 1
    val_aliases = {a for a in args.val_aliases.split(",") if a}
    train_recs, val_recs = split_by_participant(recordings, val_aliases)
    if args.limited_k is not None:
        keep = select_low_variance_participants(train_recs, args.limited_k)
        train_recs = [r for r in train_recs if r.participant.alias in keep]
        print(f"limited training to {sorted(keep)}", file=sys.stderr)
    if not train_recs:
        print("error: training side of the split is empty", file=sys.stderr)
        return 1

    train_ds = window_recordings(train_recs, args.window, args.step)
    val_ds = window_recordings(val_recs, args.window, args.step)
    if args.drop_axis:
        train_ds = drop_axis(train_ds, args.drop_axis)
        val_ds = drop_axis(val_ds, args.drop_axis)
    if not train_ds.windows:
        print("error: no training windows (recordings shorter than "
              f"--window {args.window}?)", file=sys.stderr)
        return 1
    stats = zscore_fit(train_ds)
    train_ds = zscore_apply(train_ds, stats)
    val_ds = zscore_apply(val_ds, stats)

    factory = ModelConfig.variant_a if args.variant == "A" else ModelConfig.variant_b
    model_config = factory(input_dim=len(train_ds.channel_names),
                           window_len=args.window, dropout_rate=args.dropout)
    lr = args.lr if args.lr is not None else VARIANT_DEFAULT_LR[args.variant]
    train_config = TrainConfig(
        batch_size=args.batch, learning_rate=lr, epochs=args.epochs,
        shuffle_seed=args.seed, variant=args.variant,
        dropout_rate=args.dropout, early_stop_patience=args.patience,
        target_val_acc=args.target_val_acc)

    os.makedirs(args.out, exist_ok=True)
    best_path = os.path.join(args.out, "checkpoint_best.ckpt")
    final_path = os.path.join(args.out, "checkpoint_final.ckpt")
    metrics_path = os.path.join(args.out, "metrics.csv")
    preproc_path = os.path.join(args.out, "preprocess.json")
    _write_manifest(args.out, "train", args, [args.data],
                    [best_path, final_path, metrics_path, preproc_path])

    initial = init_params(model_config, Rng(args.seed).derive("init"))
    result = train(train_ds, val_ds, model_config, train_config, initial)

    save_checkpoint(result.best_params, model_config, best_path)
    save_checkpoint(result.final_params, model_config, final_path)
    write_metrics_csv(result.metrics, metrics_path)
    _write_json(preproc_path, {
        "window_len": args.window,
        "step": args.step,
        "channel_names": list(train_ds.channel_names),
        "mean": [float(v) for v in stats.mean],
        "std": [float(v) for v in stats.std],
        "remove_gravity": bool(args.remove_gravity),
        "gravity_head": args.gravity_head,
        "clock_offset_ms": args.clock_offset,
        "label_names": list(LABEL_NAMES),
    })
    last = result.metrics[-1]
    print(f"trained {len(result.metrics)} epochs; best epoch "
          f"{result.best_epoch}; final val window acc "
          f"{last.val_window_acc:.4f}; outputs in {args.out}")
    return 0


def write_metrics_csv(metrics: list[EpochMetrics], path: str) -> None:
    lines = ["epoch,train_loss,train_acc,val_window_acc,val_gesture_acc"]
    for m in metrics:
        lines.append(f"{m.epoch},{m.train_loss!r},{m.train_acc!r},"
                     f"{m.val_window_acc!r},{m.val_gesture_acc!r}")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def _load_model_dir(model_dir: str, checkpoint_name: str):
    params, config = load_checkpoint(os.path.join(model_dir, checkpoint_name))
    with open(os.path.join(model_dir, "preprocess.json"), "r",
              encoding="utf-8") as f:
        preproc = json.load(f)
    stats = NormalizationStats(
        mean=np.asarray(preproc["mean"], dtype=np.float64),
        std=np.asarray(preproc["std"], dtype=np.float64))
    return params, config, preproc, stats


def cmd_eval(args) -> int:
    params, config, preproc, stats = _load_model_dir(args.model,
                                                     args.checkpoint_name)
    recordings = _load_recordings(args.data, preproc["clock_offset_ms"],
                                  preproc["remove_gravity"],
                                  preproc["gravity_head"])
    if recordings is None:
        return 1
    aliases = {a for a in args.val_aliases.split(",") if a}
    if aliases:
        _, recordings = split_by_participant(recordings, aliases)
    dataset = window_recordings(recordings, preproc["window_len"],
                                preproc["step"])
    dataset = _apply_channel_selection(dataset, tuple(preproc["channel_names"]))
    dataset = zscore_apply(dataset, stats)
    if not dataset.windows:
        print("error: no windows to evaluate", file=sys.stderr)
        return 1

    os.makedirs(args.out, exist_ok=True)
    confusion_path = os.path.join(args.out, "confusion.csv")
    _write_manifest(args.out, "eval", args, [args.data, args.model],
                    [confusion_path])

    matrix, window_acc = evaluate(params, config, dataset)
    probs = predict_probs(params, config, dataset.values_tensor())
    gesture_acc = _gesture_vote_acc(
        probs, dataset.label_array(),
        [w.recording_id for w in dataset.windows])
    matrix.to_csv(confusion_path)
    print(f"windows={matrix.total} window_accuracy={window_acc:.4f} "
          f"gesture_accuracy={gesture_acc:.4f}")
    print(f"confusion matrix written to {confusion_path}")
    return 0


def cmd_infer(args) -> int:
    params, config, preproc, stats = _load_model_dir(args.model,
                                                     args.checkpoint_name)
    trace = parse_sensor_csv(args.input)
    step = args.step if args.step is not None else preproc["step"]
    names = preproc["channel_names"]
    indices = tuple(CHANNEL_NAMES.index(n) for n in names)
    channel_indices = None if indices == tuple(range(6)) else indices
    for emission in stream_infer(params, config, stats, trace.samples(),
                                 step=step, channel_indices=channel_indices):
        label = GestureLabel(emission.label).csv_name \
            if config.num_classes == len(LABEL_NAMES) else str(emission.label)
        print(f"{emission.timestamp_ms},{label},{emission.confidence:.6f}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _parse_args(sys.argv[1:] if argv is None else list(argv))
    handlers = {"synth": cmd_synth, "train": cmd_train,
                "eval": cmd_eval, "infer": cmd_infer}
    try:
        return handlers[args.command](args)
    except (CorruptFileError, CheckpointError, EmptySegmentError,
            ContractViolationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
