"""Vehicle positions over time: CSV trace ingestion and synthetic straight roads.

Trace CSV format (UTF-8, comma separated, ``#`` lines ignored)::

    time,id,x,y,speed
    0.0,veh0,0.0,0.0,12.5
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

TRACE_HEADER = ("time", "id", "x", "y", "speed")


class TraceParseError(ValueError):
    def __init__(self, path, line: int, column: str | None, message: str):
        loc = f"{path}:{line}" + (f" (column {column})" if column else "")
        super().__init__(f"{loc}: {message}")
        self.path = path
        self.line = line
        self.column = column


@dataclass(frozen=True, order=True)
class TraceRow:
    time: float
    vehicle_id: str
    x: float
    y: float
    speed: float


@dataclass(frozen=True)
class RoadSpec:
    lane_count: int = 3
    directions: str = "one-way"
    lane_length: float = 2000.0
    lane_spacing: float = 3.5
    speed_range: tuple[float, float] = (10.0, 20.0)
    spawn_rate: float | None = None  # vehicles/s; None derives it from a target count

    def __post_init__(self):
        if self.lane_count < 1:
            raise ValueError("lane_count must be >= 1")
        if self.directions not in ("one-way", "two-way"):
            raise ValueError(f"directions must be 'one-way' or 'two-way', got {self.directions!r}")
        if self.directions == "two-way" and self.lane_count < 2:
            raise ValueError("a two-way road needs at least 2 lanes")
        if not self.lane_length > 0:
            raise ValueError("lane_length must be positive")
        if self.lane_spacing < 0:
            raise ValueError("lane_spacing must be >= 0")
        lo, hi = self.speed_range
        if not (0 < lo <= hi):
            raise ValueError(f"speed_range must satisfy 0 < min <= max, got {self.speed_range}")
        if self.spawn_rate is not None and self.spawn_rate < 0:
            raise ValueError("spawn_rate must be >= 0")

    @property
    def center(self) -> tuple[float, float]:
        """Midpoint of the road, across all lanes."""
        return self.lane_length / 2, (self.lane_count - 1) * self.lane_spacing / 2

    def heading(self, lane: int) -> int:
        """+1 for lanes driving towards +x, -1 otherwise."""
        if self.directions == "one-way":
            return 1
        return 1 if lane < self.lane_count // 2 else -1


def _parse_float(raw: str, path, line: int, column: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise TraceParseError(path, line, column, f"not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise TraceParseError(path, line, column, f"not finite: {raw!r}")
    return value


def load_trace(path) -> list[TraceRow]:
    """Read a trace CSV, returning rows sorted by ``(time, vehicle_id)``."""
    path = Path(path)
    rows: list[TraceRow] = []
    lines: dict[TraceRow, int] = {}
    header_seen = False
    with path.open(encoding="utf-8", newline="") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or not "".join(fields).strip():
                continue
            if fields[0].lstrip().startswith("#"):
                continue
            fields = [f.strip() for f in fields]
            if not header_seen:
                header_seen = True
                if tuple(fields) == TRACE_HEADER:
                    continue
            if len(fields) != len(TRACE_HEADER):
                raise TraceParseError(
                    path, lineno, None, f"expected {len(TRACE_HEADER)} fields, got {len(fields)}"
                )
            t, vid, x, y, speed = fields
            if not vid:
                raise TraceParseError(path, lineno, "id", "empty vehicle id")
            row = TraceRow(
                _parse_float(t, path, lineno, "time"),
                vid,
                _parse_float(x, path, lineno, "x"),
                _parse_float(y, path, lineno, "y"),
                _parse_float(speed, path, lineno, "speed"),
            )
            rows.append(row)
            lines.setdefault(row, lineno)
    rows.sort(key=lambda r: (r.time, r.vehicle_id))
    last_time: dict[str, float] = {}
    for r in rows:
        if r.vehicle_id in last_time and last_time[r.vehicle_id] >= r.time:
            raise TraceParseError(
                path, lines[r], "time", f"duplicate timestamp {r.time} for vehicle {r.vehicle_id!r}"
            )
        last_time[r.vehicle_id] = r.time
    return rows


def write_trace(rows, path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_HEADER)
        for r in rows:
            w.writerow(
                [repr(float(r.time)), r.vehicle_id, repr(float(r.x)), repr(float(r.y)), repr(float(r.speed))]
            )


class Trace:
    """Piecewise-linear vehicle trajectories built from trace rows.

    A vehicle exists from its first to its last sample (inclusive); between
    samples its position is linearly interpolated.
    """

    def __init__(self, rows):
        per_vehicle: dict[str, list[TraceRow]] = defaultdict(list)
        for r in sorted(rows, key=lambda r: (r.time, r.vehicle_id)):
            per_vehicle[r.vehicle_id].append(r)
        self.vehicle_ids: tuple[str, ...] = tuple(sorted(per_vehicle))
        self._samples = {
            vid: (
                np.array([r.time for r in rs]),
                np.array([r.x for r in rs]),
                np.array([r.y for r in rs]),
            )
            for vid, rs in per_vehicle.items()
        }
        seg_vid, t0, t1, x0, y0, x1, y1, last = [], [], [], [], [], [], [], []
        for idx, vid in enumerate(self.vehicle_ids):
            ts, xs, ys = self._samples[vid]
            if len(ts) == 1:
                pairs = [(0, 0)]
            else:
                pairs = [(k, k + 1) for k in range(len(ts) - 1)]
            for n, (a, b) in enumerate(pairs):
                seg_vid.append(idx)
                t0.append(ts[a])
                t1.append(ts[b])
                x0.append(xs[a])
                y0.append(ys[a])
                x1.append(xs[b])
                y1.append(ys[b])
                last.append(n == len(pairs) - 1)
        self._seg_vid = np.array(seg_vid, dtype=np.int64)
        self._t0 = np.array(t0, dtype=float)
        self._t1 = np.array(t1, dtype=float)
        self._x0 = np.array(x0, dtype=float)
        self._y0 = np.array(y0, dtype=float)
        self._x1 = np.array(x1, dtype=float)
        self._y1 = np.array(y1, dtype=float)
        self._last = np.array(last, dtype=bool)

    def __len__(self) -> int:
        return len(self.vehicle_ids)

    def position_at(self, vehicle_id: str, t: float) -> tuple[float, float] | None:
        samples = self._samples.get(vehicle_id)
        if samples is None:
            return None
        ts, xs, ys = samples
        if t < ts[0] or t > ts[-1]:
            return None
        return float(np.interp(t, ts, xs)), float(np.interp(t, ts, ys))

    def positions_at(self, t: float) -> tuple[list[str], np.ndarray, np.ndarray]:
        """All vehicles present at ``t``: sorted ids, ``(n, 2)`` positions, ``(n, 2)`` velocities."""
        if len(self._t0) == 0:
            return [], np.empty((0, 2)), np.empty((0, 2))
        live = (self._t0 <= t) & ((t < self._t1) | (self._last & (t == self._t1)))
        idx = np.nonzero(live)[0]
        span = self._t1[idx] - self._t0[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(span > 0, (t - self._t0[idx]) / span, 0.0)
            vx = np.where(span > 0, (self._x1[idx] - self._x0[idx]) / span, 0.0)
            vy = np.where(span > 0, (self._y1[idx] - self._y0[idx]) / span, 0.0)
        x = self._x0[idx] + frac * (self._x1[idx] - self._x0[idx])
        y = self._y0[idx] + frac * (self._y1[idx] - self._y0[idx])
        ids = [self.vehicle_ids[i] for i in self._seg_vid[idx]]
        # segment table is grouped by vehicle index, which is sorted by id
        return ids, np.column_stack([x, y]), np.column_stack([vx, vy])


def generate_road(
    spec: RoadSpec, seed, duration: float, vehicle_count: int | None = None
) -> list[TraceRow]:
    """Constant-velocity vehicles on straight parallel lanes along the x axis.

    Vehicle ``k`` spawns at ``(k + u) / spawn_rate`` with ``u ~ U[0, 1)``, on a
    uniformly drawn lane, with a speed drawn uniformly from ``speed_range``.
    It drives to the far end of its lane and despawns there (or at
    ``duration``).  With ``vehicle_count`` set and no ``spawn_rate``, the rate
    is chosen so exactly that many vehicles spawn within ``duration``.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    if duration <= 0:
        return []
    rate = spec.spawn_rate
    if rate is None:
        if vehicle_count is None:
            raise ValueError("either spawn_rate or vehicle_count is required")
        rate = vehicle_count / duration
    if rate == 0 or vehicle_count == 0:
        return []
    count = int(math.floor(rate * duration)) if vehicle_count is None else vehicle_count
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    lanes = rng.integers(0, spec.lane_count, size=count)
    speeds = rng.uniform(spec.speed_range[0], spec.speed_range[1], size=count)
    jitter = rng.uniform(0.0, 1.0, size=count)
    width = len(str(max(count - 1, 0)))

    rows: list[TraceRow] = []
    for k in range(count):
        t_spawn = float((k + jitter[k]) / rate)
        if t_spawn >= duration:
            raise ValueError(
                f"vehicle {k} would spawn at {t_spawn:.3f}s, past duration {duration}s; "
                "increase spawn_rate or lower vehicle_count"
            )
        lane = int(lanes[k])
        heading = spec.heading(lane)
        speed = float(speeds[k])
        y = lane * spec.lane_spacing
        x_start = 0.0 if heading > 0 else spec.lane_length
        t_end = min(t_spawn + spec.lane_length / speed, duration)
        x_end = x_start + heading * speed * (t_end - t_spawn)
        vid = f"veh{k:0{width}d}"
        rows.append(TraceRow(t_spawn, vid, x_start, y, speed))
        if t_end > t_spawn:
            rows.append(TraceRow(t_end, vid, x_end, y, speed))
    rows.sort(key=lambda r: (r.time, r.vehicle_id))
    return rows
