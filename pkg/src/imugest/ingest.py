"""Reading and segmenting two-phone recording artifacts.

A session is a directory holding two UTF-8, LF-terminated CSV files:

* ``sensors.csv``  -- ``timestamp_ms,acc_x,acc_y,acc_z,gyro_x,gyro_y,gyro_z``
  (one fused accelerometer+gyroscope row per sample, timestamps strictly
  increasing, optional single header line)
* ``events.csv``   -- ``label,start_ms,end_ms`` (gesture intervals from the
  supervising phone, non-overlapping, optional header)

Datasets are laid out as ``<root>/<alias>/<session>/sensors.csv`` with the
matching ``events.csv`` beside it.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .errors import ContractViolationError, CorruptFileError, EmptySegmentError
from .labels import GestureLabel

CHANNEL_NAMES = ("acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z")
SENSOR_HEADER = "timestamp_ms," + ",".join(CHANNEL_NAMES)
EVENTS_HEADER = "label,start_ms,end_ms"


@dataclass(frozen=True)
class SensorSample:
    """One timestamped 6-axis reading: acc in m/s^2, gyro in rad/s."""

    t: int
    acc: tuple[float, float, float]
    gyro: tuple[float, float, float]

    @property
    def values(self) -> tuple[float, ...]:
        return self.acc + self.gyro


@dataclass(frozen=True)
class ParticipantMeta:
    alias: str
    gender: str = "unspecified"
    handedness: str = "right"
    age: int = 25
    occupation: str = "unspecified"

    def __post_init__(self):
        if not self.alias:
            raise ContractViolationError("participant alias must be nonempty")
        if self.age <= 0:
            raise ContractViolationError("participant age must be positive")


@dataclass
class SensorTrace:
    """A session's full recording: times (N,) int64 ms, values (N, 6)."""

    participant: ParticipantMeta
    session_id: str
    times: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def samples(self) -> Iterator[SensorSample]:
        for t, row in zip(self.times, self.values):
            yield SensorSample(int(t),
                               (float(row[0]), float(row[1]), float(row[2])),
                               (float(row[3]), float(row[4]), float(row[5])))


@dataclass(frozen=True)
class GestureEvent:
    label: GestureLabel
    start_ms: int
    end_ms: int


@dataclass
class GestureRecording:
    """One gesture's slice of a trace. ``source_id`` identifies where the
    slice came from (alias/session/event index) so windows cut from it can
    be grouped back per gesture."""

    label: GestureLabel
    participant: ParticipantMeta
    times: np.ndarray
    values: np.ndarray
    source_id: str = ""

    def __len__(self) -> int:
        return len(self.times)


def _parse_float(field_text: str, path: str, line_no: int, col: str) -> float:
    try:
        value = float(field_text)
    except ValueError:
        raise CorruptFileError(
            path, line_no, f"non-numeric {col} field {field_text!r}") from None
    if not np.isfinite(value):
        raise CorruptFileError(path, line_no, f"non-finite {col} value")
    return value


def _read_lines(path: str) -> list[str]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        text = f.read()
    return text.splitlines()


def _looks_like_header(first_field: str) -> bool:
    try:
        int(first_field)
        return False
    except ValueError:
        return True


def parse_sensor_csv(path: str, participant: ParticipantMeta | None = None,
                     session_id: str = "") -> SensorTrace:
    """Parse a sensors.csv into a SensorTrace, validating field count,
    numeric fields, and strictly increasing timestamps. Errors carry the
    1-based line number."""
    lines = _read_lines(path)
    times: list[int] = []
    rows: list[list[float]] = []
    start = 0
    if lines and _looks_like_header(lines[0].split(",")[0]):
        start = 1
    prev_t: int | None = None
    for line_no in range(start, len(lines)):
        line = lines[line_no]
        if line == "":
            continue
        fields = line.split(",")
        if len(fields) != 7:
            raise CorruptFileError(
                path, line_no + 1, f"expected 7 fields, got {len(fields)}")
        try:
            t = int(fields[0])
        except ValueError:
            raise CorruptFileError(
                path, line_no + 1,
                f"non-integer timestamp {fields[0]!r}") from None
        if prev_t is not None and t <= prev_t:
            raise CorruptFileError(
                path, line_no + 1,
                f"non-increasing timestamp {t} after {prev_t}")
        prev_t = t
        row = [_parse_float(fields[k + 1], path, line_no + 1, CHANNEL_NAMES[k])
               for k in range(6)]
        times.append(t)
        rows.append(row)
    meta = participant or ParticipantMeta(alias="unknown")
    return SensorTrace(
        participant=meta,
        session_id=session_id,
        times=np.asarray(times, dtype=np.int64),
        values=np.asarray(rows, dtype=np.float64).reshape(len(rows), 6),
    )


def parse_timestamp_csv(path: str) -> list[GestureEvent]:
    """Parse an events.csv; labels are matched case-insensitively and events
    must be orderable and non-overlapping."""
    lines = _read_lines(path)
    events: list[GestureEvent] = []
    start = 0
    if lines:
        first = lines[0].split(",")
        if len(first) == 3 and first[0].strip().lower() == "label":
            start = 1
    for line_no in range(start, len(lines)):
        line = lines[line_no]
        if line == "":
            continue
        fields = line.split(",")
        if len(fields) != 3:
            raise CorruptFileError(
                path, line_no + 1, f"expected 3 fields, got {len(fields)}")
        try:
            label = GestureLabel.from_name(fields[0])
        except KeyError as e:
            raise CorruptFileError(path, line_no + 1, str(e.args[0])) from None
        try:
            start_ms, end_ms = int(fields[1]), int(fields[2])
        except ValueError:
            raise CorruptFileError(
                path, line_no + 1, "non-integer event timestamp") from None
        if start_ms >= end_ms:
            raise CorruptFileError(
                path, line_no + 1,
                f"event start {start_ms} must precede end {end_ms}")
        events.append(GestureEvent(label, start_ms, end_ms))
    events.sort(key=lambda e: e.start_ms)
    for prev, cur in zip(events, events[1:]):
        if cur.start_ms <= prev.end_ms:
            raise CorruptFileError(
                path, None,
                f"events overlap: {prev.label.csv_name} ends at {prev.end_ms}, "
                f"{cur.label.csv_name} starts at {cur.start_ms}")
    return events


def segment_recordings(trace: SensorTrace, events: list[GestureEvent],
                       clock_offset_ms: int = 0) -> list[GestureRecording]:
    """Slice the trace into one recording per event.

    A sample belongs to an event when start <= t + clock_offset <= end, both
    boundaries inclusive. ``clock_offset_ms`` absorbs residual clock skew
    between the recording phone and the event-marking phone.
    """
    recordings = []
    shifted = trace.times + int(clock_offset_ms)
    for idx, event in enumerate(events):
        mask = (shifted >= event.start_ms) & (shifted <= event.end_ms)
        count = int(mask.sum())
        if count == 0:
            raise EmptySegmentError(event.label.csv_name, event.start_ms,
                                    event.end_ms)
        recordings.append(GestureRecording(
            label=event.label,
            participant=trace.participant,
            times=trace.times[mask].copy(),
            values=trace.values[mask].copy(),
            source_id=f"{trace.participant.alias}/{trace.session_id}/ev{idx:02d}",
        ))
    return recordings


@dataclass
class SessionData:
    """One accepted sensors/events pair, already parsed."""

    alias: str
    session_id: str
    sensors_path: str
    events_path: str
    trace: SensorTrace
    events: list[GestureEvent]


@dataclass
class Rejection:
    path: str
    reason: str


@dataclass
class RejectionReport:
    rejections: list[Rejection] = field(default_factory=list)

    def add(self, path: str, reason: str) -> None:
        self.rejections.append(Rejection(path, reason))

    def __len__(self) -> int:
        return len(self.rejections)

    def summary(self) -> str:
        if not self.rejections:
            return "no rejected files"
        lines = [f"{len(self.rejections)} rejected:"]
        lines += [f"  {r.path}: {r.reason}" for r in self.rejections]
        return "\n".join(lines)


def reject_corrupt(dataset_dir: str) -> tuple[list[SessionData], RejectionReport]:
    """Scan a dataset directory, pair sensor files with their event files,
    and parse both. Files that fail to pair or parse land in the report
    instead of raising."""
    accepted: list[SessionData] = []
    report = RejectionReport()
    if not os.path.isdir(dataset_dir):
        report.add(dataset_dir, "not a directory")
        return accepted, report
    for alias in sorted(os.listdir(dataset_dir)):
        alias_dir = os.path.join(dataset_dir, alias)
        if not os.path.isdir(alias_dir):
            continue
        for session in sorted(os.listdir(alias_dir)):
            session_dir = os.path.join(alias_dir, session)
            if not os.path.isdir(session_dir):
                continue
            sensors_path = os.path.join(session_dir, "sensors.csv")
            events_path = os.path.join(session_dir, "events.csv")
            has_sensors = os.path.isfile(sensors_path)
            has_events = os.path.isfile(events_path)
            if not has_sensors and not has_events:
                continue
            if not has_events:
                report.add(sensors_path, "missing pair: no events.csv")
                continue
            if not has_sensors:
                report.add(events_path, "missing pair: no sensors.csv")
                continue
            try:
                trace = parse_sensor_csv(
                    sensors_path, ParticipantMeta(alias=alias), session)
            except CorruptFileError as e:
                report.add(sensors_path, e.reason)
                continue
            try:
                events = parse_timestamp_csv(events_path)
            except CorruptFileError as e:
                report.add(events_path, e.reason)
                continue
            accepted.append(SessionData(alias, session, sensors_path,
                                        events_path, trace, events))
    return accepted, report


def format_float(x: float) -> str:
    """Shortest decimal text that parses back to the same float64."""
    return repr(float(x))


def write_sensor_csv(trace: SensorTrace, path: str) -> None:
    """Write the canonical sensors.csv (header, LF endings, round-trip-exact
    float formatting)."""
    lines = [SENSOR_HEADER]
    for t, row in zip(trace.times, trace.values):
        lines.append(str(int(t)) + "," + ",".join(format_float(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def write_events_csv(events: list[GestureEvent], path: str) -> None:
    """Write the canonical events.csv."""
    lines = [EVENTS_HEADER]
    for e in events:
        lines.append(f"{e.label.csv_name},{e.start_ms},{e.end_ms}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
