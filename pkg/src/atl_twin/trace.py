"""Per-tick trace records: CSV for scalars, JSONL sidecar for events."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import IO, List, Optional


@dataclass(frozen=True)
class TraceRecord:
    t: float
    state: str
    track: int
    s_progress: float
    # digital outputs
    feed_valve: int
    blade_valve: int
    heater_enable_1: int
    heater_enable_2: int
    heater_enable_3: int
    # digital inputs
    auto_switch_rear: int
    auto_switch_front: int
    # analog inputs (reported zone temperatures, deg C)
    zone_temp_1: float
    zone_temp_2: float
    zone_temp_3: float
    # analog outputs (heater power commands, W)
    heater_power_1: float
    heater_power_2: float
    heater_power_3: float
    # setpoints visible to the operator
    temp_setpoint: float
    force_target: float
    # force device
    acf_force: float
    acf_stroke: float
    acf_contact: int
    acf_error: int
    # tape
    spool_remaining: float
    fed_length: float
    tail_remaining: float  # -1 when uncut
    # mold pose
    mold_x: float
    mold_y: float
    mold_z: float
    mold_qw: float
    mold_qx: float
    mold_qy: float
    mold_qz: float
    # joints
    q1: float
    q2: float
    q3: float
    q4: float
    q5: float
    q6: float


TRACE_COLUMNS = [f.name for f in fields(TraceRecord)]


def format_value(v) -> str:
    if isinstance(v, float):
        # float() unwraps numpy scalars so repr stays a plain decimal literal
        return repr(float(v))
    return str(v)


class TraceWriter:
    """CSV trace plus a JSONL sidecar for alarms and state transitions."""

    def __init__(self, csv_path, events_path=None):
        self.csv_path = Path(csv_path)
        if events_path is None:
            events_path = self.csv_path.with_suffix(".events.jsonl")
        self.events_path = Path(events_path)
        self._csv: Optional[IO] = None
        self._events: Optional[IO] = None
        self.count = 0

    def open(self) -> "TraceWriter":
        self._csv = self.csv_path.open("w", newline="\n")
        self._csv.write(",".join(TRACE_COLUMNS) + "\n")
        self._events = self.events_path.open("w", newline="\n")
        return self

    def close(self) -> None:
        if self._csv:
            self._csv.close()
            self._csv = None
        if self._events:
            self._events.close()
            self._events = None

    def __enter__(self) -> "TraceWriter":
        return self.open()

    def __exit__(self, *exc) -> None:
        self.close()

    def write(self, rec: TraceRecord) -> None:
        row = ",".join(format_value(getattr(rec, c)) for c in TRACE_COLUMNS)
        self._csv.write(row + "\n")
        self.count += 1

    def event(self, t: float, kind: str, detail: str) -> None:
        self._events.write(
            json.dumps({"t": t, "kind": kind, "detail": detail}, sort_keys=True) + "\n"
        )


class TraceBuffer:
    """In-memory sink used when no file output is wanted."""

    def __init__(self, keep_last: int = 0):
        self.records: List[TraceRecord] = []
        self.events: List[dict] = []
        self.keep_last = keep_last
        self.count = 0

    def write(self, rec: TraceRecord) -> None:
        self.records.append(rec)
        if self.keep_last and len(self.records) > self.keep_last:
            self.records.pop(0)
        self.count += 1

    def event(self, t: float, kind: str, detail: str) -> None:
        self.events.append({"t": t, "kind": kind, "detail": detail})
