"""Run metrics: collaborating vehicles (NCV), average delivery delay (ADD),
generated / delivered monitoring packets (NGM / NDM) and exchanged packet
overload (EPO), bucketed over time, plus CSV export.

EPO counts transmissions, one per beacon, per monitoring broadcast and per
delivery to a base station; receptions are not counted.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

BUCKET_WIDTH = 10.0
RECORD_HEADER = ("bucket_start_s", "ncv", "ngm", "ndm", "epo", "add_ms")
SWEEP_HEADER = ("w_ec", "add_ms", "ndm")


@dataclass(frozen=True)
class DeliveryLogEntry:
    event_id: str
    origin: str
    sequence: int
    detect_time: float
    deliver_time: float
    gateway_id: str
    hop_count: int

    def __post_init__(self):
        if self.deliver_time < self.detect_time:
            raise ValueError("delivery precedes detection")

    @property
    def packet(self) -> tuple[str, str, int]:
        return (self.event_id, self.origin, self.sequence)


@dataclass(frozen=True)
class MetricsRecord:
    time_bucket: float
    ncv: int
    ngm: int
    ndm: int
    epo: int
    add_ms: float | None


def first_deliveries(log: Iterable[DeliveryLogEntry]) -> dict[tuple, DeliveryLogEntry]:
    first: dict[tuple, DeliveryLogEntry] = {}
    for e in log:
        cur = first.get(e.packet)
        if cur is None or e.deliver_time < cur.deliver_time:
            first[e.packet] = e
    return first


def compute_add(log: Iterable[DeliveryLogEntry]) -> float | None:
    """Mean over packets of first delivery minus detection, in ms; ``None`` without deliveries."""
    first = first_deliveries(log)
    if not first:
        return None
    delays = [e.deliver_time - e.detect_time for e in first.values()]
    return 1000.0 * math.fsum(delays) / len(delays)


class MetricsCollector:
    def __init__(self, duration: float, bucket_width: float = BUCKET_WIDTH):
        if bucket_width <= 0:
            raise ValueError("bucket_width must be positive")
        self.duration = duration
        self.bucket_width = bucket_width
        n = max(0, math.ceil(duration / bucket_width - 1e-9))
        self.n_buckets = n
        self.epo = [0] * n
        self.ngm = [0] * n
        self.ndm = [0] * n
        self.beacons = 0
        self.monitoring_tx = 0
        self.collaborators: list[set[str]] = [set() for _ in range(n)]
        self.all_collaborators: set[str] = set()
        self.deliveries: list[DeliveryLogEntry] = []

    def bucket(self, t: float) -> int:
        b = int(t // self.bucket_width)
        return min(max(b, 0), self.n_buckets - 1)

    def record_transmission(self, kind: str, t: float, count: int = 1) -> None:
        if kind == "beacon":
            self.beacons += count
        elif kind == "monitoring":
            self.monitoring_tx += count
        else:
            raise ValueError(f"unknown transmission kind {kind!r}")
        if self.n_buckets:
            self.epo[self.bucket(t)] += count

    def record_generated(self, t: float) -> None:
        self.ngm[self.bucket(t)] += 1

    def record_delivery(self, entry: DeliveryLogEntry) -> None:
        self.deliveries.append(entry)
        self.ndm[self.bucket(entry.deliver_time)] += 1
        self.record_transmission("monitoring", entry.deliver_time)

    def record_collaborator(self, vehicle_id: str, t: float) -> None:
        self.collaborators[self.bucket(t)].add(vehicle_id)
        self.all_collaborators.add(vehicle_id)

    def records(self) -> list[MetricsRecord]:
        per_bucket: list[list[DeliveryLogEntry]] = [[] for _ in range(self.n_buckets)]
        for e in first_deliveries(self.deliveries).values():
            per_bucket[self.bucket(e.deliver_time)].append(e)
        return [
            MetricsRecord(
                time_bucket=round(b * self.bucket_width, 9),
                ncv=len(self.collaborators[b]),
                ngm=self.ngm[b],
                ndm=self.ndm[b],
                epo=self.epo[b],
                add_ms=compute_add(per_bucket[b]),
            )
            for b in range(self.n_buckets)
        ]


@dataclass
class MetricsReport:
    protocol: str
    seed: int
    records: list[MetricsRecord] = field(default_factory=list)
    deliveries: list[DeliveryLogEntry] = field(default_factory=list)
    ncv_total: int = 0
    beacons: int = 0
    monitoring_tx: int = 0
    log: list = field(default_factory=list, repr=False)

    @property
    def ngm(self) -> int:
        return sum(r.ngm for r in self.records)

    @property
    def ndm(self) -> int:
        return sum(r.ndm for r in self.records)

    @property
    def epo(self) -> int:
        return sum(r.epo for r in self.records)

    @property
    def ncv_max(self) -> int:
        return max((r.ncv for r in self.records), default=0)

    @property
    def add_ms(self) -> float | None:
        return compute_add(self.deliveries)

    def ngm_stream(self) -> list[int]:
        return [r.ngm for r in self.records]

    def summary(self) -> dict:
        return {
            "protocol": self.protocol,
            "seed": self.seed,
            "ncv_max": self.ncv_max,
            "ncv_total": self.ncv_total,
            "ngm": self.ngm,
            "ndm": self.ndm,
            "epo": self.epo,
            "beacons": self.beacons,
            "monitoring_tx": self.monitoring_tx,
            "add_ms": self.add_ms,
        }


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_csv(records: Iterable[MetricsRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_HEADER)
    for r in records:
        w.writerow([_fmt(r.time_bucket), r.ncv, r.ngm, r.ndm, r.epo, _fmt(r.add_ms)])
    return buf.getvalue()


def sweep_csv(rows: Iterable[tuple[float, float | None, int]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for w_ec, add_ms, ndm in rows:
        w.writerow([_fmt(float(w_ec)), _fmt(add_ms), ndm])
    return buf.getvalue()


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file and rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export(report: MetricsReport, path) -> None:
    write_atomic(path, records_csv(report.records))
