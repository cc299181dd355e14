"""Synthetic labeled IMU recordings for the ten gestures.

Each gesture is a parametric 2-D path p(u), u in [0, 1], traced in the
device xy-plane while the phone lies flat (gravity on +z). A recording
samples the path at the configured rate under an ease-in/ease-out speed
profile with a smooth random warp, so every gesture starts and ends at
rest. The accelerometer is the second central difference of position plus
gravity and white noise; the gyroscope carries band-limited wobble, a yaw
profile for the rotation-bearing gestures (circle, semicircle), and white
noise.

Two path-containment relationships hold by construction and are part of
the module contract: the semicircle path is the first half of the circle
path, and the tilde path is the first half of the infinity path, each up
to its per-gesture scale factor.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np

from .errors import ContractViolationError
from .ingest import (GestureEvent, ParticipantMeta, SensorTrace,
                     write_events_csv, write_sensor_csv)
from .labels import GestureLabel
from .numerics import Rng

GRAVITY = 9.81  # m/s^2 on device +z while flat


@dataclass(frozen=True)
class SynthConfig:
    sample_rate: float = 100.0          # Hz
    duration_mean: float = 6.12         # seconds per gesture
    duration_jitter: float = 0.12       # fraction of duration_mean
    noise_std_acc: float = 0.04         # m/s^2 white noise
    noise_std_gyro: float = 0.02        # rad/s white noise
    gyro_wobble: float = 0.03           # rad/s band-limited hand wobble
    amplitude: float = 0.12             # meters, unit-shape scale
    speed_warp: float = 0.25            # strength of the random time warp
    rotation_max: float = 0.25          # radians, per-recording plane rotation
    idle_min: float = 0.5               # seconds between gestures
    idle_max: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.sample_rate <= 0 or self.sample_rate > 1000:
            raise ContractViolationError("sample_rate must be in (0, 1000] Hz")
        if min(self.noise_std_acc, self.noise_std_gyro, self.gyro_wobble) < 0:
            raise ContractViolationError("noise levels must be >= 0")
        if not 0.0 <= self.speed_warp < 1.0:
            raise ContractViolationError("speed_warp must be in [0, 1)")


def _polyline(vertices: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Constant-speed traversal of a piecewise-linear path."""
    seg = np.diff(vertices, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    knots = np.concatenate([[0.0], np.cumsum(lengths)])
    knots /= knots[-1]
    x = np.interp(u, knots, vertices[:, 0])
    y = np.interp(u, knots, vertices[:, 1])
    return np.stack([x, y], axis=-1)


def _circle(u):
    angle = 2.0 * np.pi * u
    return np.stack([np.cos(angle), np.sin(angle)], axis=-1)


def _infinity(u):
    angle = 2.0 * np.pi * u
    return np.stack([np.cos(angle), 0.5 * np.sin(2.0 * angle)], axis=-1)


def _semicircle(u):
    # first half of the circle path, traced in reverse (clockwise)
    return _circle((1.0 - np.asarray(u)) * 0.5)


def _tilde(u):
    # first half of the infinity path
    return _infinity(np.asarray(u) * 0.5)


def _repeat_closed(path, laps: int):
    """Trace a closed path ``laps`` times over u in [0, 1]."""
    def wrapped(u):
        return path(np.mod(np.asarray(u) * laps, 1.0))
    return wrapped


def _pingpong(path, strokes: int):
    """Trace an open path back and forth, ``strokes`` traversals total."""
    def wrapped(u):
        s = np.asarray(u) * strokes
        seg = np.minimum(np.floor(s), strokes - 1)
        r = s - seg
        return path(np.where(seg % 2 == 0, r, 1.0 - r))
    return wrapped


def _triangle_once(u):
    v = np.array([[0.0, 1.0], [-0.866, -0.5], [0.866, -0.5], [0.0, 1.0]])
    return _polyline(v, u)


def _square_once(u):
    v = np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0],
                  [1.0, 1.0]]) * 0.75
    return _polyline(v, u)


def _zigzag_once(u):
    v = np.array([[-1.0, 0.5], [-0.33, -0.5], [0.33, 0.5], [1.0, -0.5]])
    return _polyline(v, u)


def _vline_once(u):
    u = np.asarray(u)
    return np.stack([np.zeros_like(u), 1.0 - 2.0 * u], axis=-1)


def _hline_once(u):
    u = np.asarray(u)
    return np.stack([2.0 * u - 1.0, np.zeros_like(u)], axis=-1)


def _letter_s(u):
    u = np.asarray(u)
    upper = 0.5 * np.pi + 2.0 * np.pi * u          # pi/2 -> 3pi/2 over [0, .5]
    lower = 0.5 * np.pi - 2.0 * np.pi * (u - 0.5)  # pi/2 -> -pi/2 over [.5, 1]
    up = np.stack([0.5 * np.cos(upper), 0.5 + 0.5 * np.sin(upper)], axis=-1)
    lo = np.stack([0.5 * np.cos(lower), -0.5 + 0.5 * np.sin(lower)], axis=-1)
    return np.where((u <= 0.5)[..., None], up, lo)


@dataclass(frozen=True)
class TrajectorySpec:
    """A gesture's unit path, its relative size and tempo, and the total
    in-plane rotation its execution imparts to the device (drives the yaw
    profile). ``tempo`` multiplies the configured mean duration: quick
    strokes like a vertical line finish faster than a full figure-eight."""

    label: GestureLabel
    unit_path: callable
    scale: float
    tempo: float
    turn_angle: float


TRAJECTORIES: dict[GestureLabel, TrajectorySpec] = {
    spec.label: spec for spec in [
        TrajectorySpec(GestureLabel.CIRCLE, _circle, 1.0, 0.90, 2.0 * np.pi),
        TrajectorySpec(GestureLabel.SEMICIRCLE, _semicircle, 1.15, 0.65, np.pi),
        TrajectorySpec(GestureLabel.INFINITY, _infinity, 1.0, 1.40, 0.0),
        TrajectorySpec(GestureLabel.TILDE, _tilde, 1.25, 1.00, 0.0),
        TrajectorySpec(GestureLabel.TRIANGLE, _triangle, 1.0, 1.15, 0.0),
        TrajectorySpec(GestureLabel.SQUARE, _square, 0.9, 1.30, 0.0),
        TrajectorySpec(GestureLabel.ZIGZAG, _zigzag, 1.0, 1.05, 0.0),
        TrajectorySpec(GestureLabel.VLINE, _vline, 1.1, 0.55, 0.0),
        TrajectorySpec(GestureLabel.HLINE, _hline, 1.1, 0.75, 0.0),
        TrajectorySpec(GestureLabel.LETTER_S, _letter_s, 0.9, 1.05, 0.0),
    ]
}

EASE_RAMP = 0.15  # fraction of the duration spent accelerating/braking


def _ease(s: np.ndarray) -> np.ndarray:
    """Start-and-stop-at-rest profile: speed ramps up over the first
    EASE_RAMP of the duration, cruises, and ramps down symmetrically, so
    the derivative vanishes at both ends."""
    ramp = EASE_RAMP
    speed = np.ones_like(s)
    head = s < ramp
    tail = s > 1.0 - ramp
    speed[head] = 0.5 * (1.0 - np.cos(np.pi * s[head] / ramp))
    speed[tail] = 0.5 * (1.0 - np.cos(np.pi * (1.0 - s[tail]) / ramp))
    u = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]))])
    return u / u[-1]


def _warp(x: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Monotone perturbation of [0,1]; fixed endpoints."""
    out = x.copy()
    for k, a in enumerate(coeffs, start=1):
        out += a * np.sin(np.pi * k * x)
    return out


def _draw_warp_coeffs(config: SynthConfig, rng: Rng) -> np.ndarray:
    # sum_k |a_k| * pi * k <= speed_warp < 1 keeps the warp monotone
    raw = rng.uniform(-1.0, 1.0, 3)
    k = np.arange(1, 4)
    return config.speed_warp * raw / (np.pi * k * 3.0)


def _trajectory_core(label: GestureLabel, config: SynthConfig, rng: Rng
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Sampled positions (T, 2) and the path parameter u (T,)."""
    spec = TRAJECTORIES[label]
    duration = config.duration_mean * spec.tempo * (
        1.0 + config.duration_jitter * float(rng.uniform(-1.0, 1.0)))
    n = max(3, int(round(duration * config.sample_rate)))
    s = np.linspace(0.0, 1.0, n)
    u = _warp(_ease(s), _draw_warp_coeffs(config, rng))
    theta = float(rng.uniform(-config.rotation_max, config.rotation_max))
    rot = np.array([[np.cos(theta), -np.sin(theta)],
                    [np.sin(theta), np.cos(theta)]])
    positions = (config.amplitude * spec.scale) * spec.unit_path(u) @ rot.T
    return positions, u


def generate_trajectory(label: GestureLabel, config: SynthConfig,
                        rng: Rng) -> np.ndarray:
    """Time-sampled positions (T, 2) in meters for one gesture execution."""
    return _trajectory_core(label, config, rng)[0]


def _timestamps(n: int, sample_rate: float) -> np.ndarray:
    t = np.round(np.arange(n) * (1000.0 / sample_rate)).astype(np.int64)
    if n > 1 and np.any(np.diff(t) <= 0):
        raise ContractViolationError(
            f"sample_rate {sample_rate} Hz does not yield strictly "
            "increasing millisecond timestamps")
    return t


def _imu_values(positions: np.ndarray, config: SynthConfig, rng: Rng,
                yaw_rate: np.ndarray | None = None) -> np.ndarray:
    """(T, 6) sensor rows for a position track: acc x,y,z then gyro x,y,z."""
    n = len(positions)
    if n < 3:
        raise ContractViolationError(
            f"need at least 3 position samples, got {n}")
    dt = 1.0 / config.sample_rate
    acc_xy = np.empty_like(positions)
    acc_xy[1:-1] = (positions[2:] - 2.0 * positions[1:-1] + positions[:-2]) / dt**2
    acc_xy[0] = acc_xy[1]
    acc_xy[-1] = acc_xy[-2]

    values = np.zeros((n, 6))
    values[:, 0:2] = acc_xy
    values[:, 2] = GRAVITY
    values[:, 0:3] += rng.normal(0.0, config.noise_std_acc, (n, 3))

    # hand wobble: a few random low-frequency sinusoids per gyro axis
    t = np.arange(n) * dt
    wobble = np.zeros((n, 3))
    for axis in range(3):
        for _ in range(3):
            freq = float(rng.uniform(0.4, 2.5))
            phase = float(rng.uniform(0.0, 2.0 * np.pi))
            amp = float(rng.uniform(0.0, config.gyro_wobble))
            wobble[:, axis] += amp * np.sin(2.0 * np.pi * freq * t + phase)
    values[:, 3:6] = wobble
    if yaw_rate is not None:
        values[:, 5] += yaw_rate
    values[:, 3:6] += rng.normal(0.0, config.noise_std_gyro, (n, 3))
    return values


def trajectory_to_imu(positions: np.ndarray, config: SynthConfig, rng: Rng,
                      yaw_rate: np.ndarray | None = None,
                      participant: ParticipantMeta | None = None,
                      session_id: str = "") -> SensorTrace:
    """Convert a position track into a noisy 6-axis SensorTrace with
    millisecond timestamps."""
    positions = np.asarray(positions, dtype=np.float64)
    values = _imu_values(positions, config, rng, yaw_rate)
    return SensorTrace(
        participant=participant or ParticipantMeta(alias="synthetic"),
        session_id=session_id,
        times=_timestamps(len(values), config.sample_rate),
        values=values,
    )


def _gesture_values(label: GestureLabel, config: SynthConfig,
                    rng: Rng) -> np.ndarray:
    """One gesture's sensor rows, including its yaw profile."""
    positions, u = _trajectory_core(label, config, rng)
    spec = TRAJECTORIES[label]
    yaw_rate = None
    if spec.turn_angle != 0.0:
        dt = 1.0 / config.sample_rate
        yaw_rate = spec.turn_angle * np.gradient(u, dt)
    return _imu_values(positions, config, rng, yaw_rate)


def _idle_values(config: SynthConfig, rng: Rng, seconds: float) -> np.ndarray:
    n = max(3, int(round(seconds * config.sample_rate)))
    positions = np.zeros((n, 2))
    return _imu_values(positions, config, rng)


def _personalize(config: SynthConfig, rng: Rng) -> SynthConfig:
    """Per-participant execution style: noise level, speed, gesture size."""
    noise = float(rng.uniform(0.75, 1.25))
    speed = float(rng.uniform(0.92, 1.08))
    size = float(rng.uniform(0.85, 1.15))
    return replace(
        config,
        noise_std_acc=config.noise_std_acc * noise,
        noise_std_gyro=config.noise_std_gyro * noise,
        duration_mean=config.duration_mean / speed,
        amplitude=config.amplitude * size,
    )


def generate_session(config: SynthConfig, rng: Rng,
                     participant: ParticipantMeta, session_id: str
                     ) -> tuple[SensorTrace, list[GestureEvent]]:
    """One gesture set: all ten gestures in seeded random order with idle
    gaps, as a single continuous trace plus the true event intervals."""
    order = [GestureLabel(i) for i in rng.permutation(len(GestureLabel))]
    chunks: list[np.ndarray] = []
    spans: list[tuple[GestureLabel, int, int]] = []  # label, first, last index
    total = 0

    def idle():
        nonlocal total
        gap = _idle_values(config, rng,
                           float(rng.uniform(config.idle_min, config.idle_max)))
        chunks.append(gap)
        total += len(gap)

    idle()
    for label in order:
        values = _gesture_values(label, config, rng)
        spans.append((label, total, total + len(values) - 1))
        chunks.append(values)
        total += len(values)
        idle()

    values = np.concatenate(chunks, axis=0)
    times = _timestamps(len(values), config.sample_rate)
    trace = SensorTrace(participant=participant, session_id=session_id,
                        times=times, values=values)
    events = [GestureEvent(label, int(times[first]), int(times[last]))
              for label, first, last in spans]
    events.sort(key=lambda e: e.start_ms)
    return trace, events


def generate_dataset(config: SynthConfig, participants: int,
                     sessions_per_participant: int,
                     out_dir: str) -> list[tuple[str, str]]:
    """Write an ingest-compatible dataset directory.

    Layout: ``<out_dir>/p<N>/s<M>/sensors.csv`` + ``events.csv``. Every
    participant gets a personality derived from the seed; identical config
    reproduces byte-identical files. Returns the written (sensors, events)
    path pairs.
    """
    if participants < 1 or sessions_per_participant < 1:
        raise ContractViolationError("participants and sessions must be >= 1")
    master = Rng(config.seed)
    written: list[tuple[str, str]] = []
    for p in range(1, participants + 1):
        alias = f"p{p}"
        meta = ParticipantMeta(alias=alias)
        personal = _personalize(config, master.derive(f"participant:{alias}"))
        for s in range(1, sessions_per_participant + 1):
            session_id = f"s{s:02d}"
            rng = master.derive(f"session:{alias}:{session_id}")
            trace, events = generate_session(personal, rng, meta, session_id)
            session_dir = os.path.join(out_dir, alias, session_id)
            os.makedirs(session_dir, exist_ok=True)
            sensors_path = os.path.join(session_dir, "sensors.csv")
            events_path = os.path.join(session_dir, "events.csv")
            write_sensor_csv(trace, sensors_path)
            write_events_csv(events, events_path)
            written.append((sensors_path, events_path))
    return written
