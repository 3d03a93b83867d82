"""Scenario configuration: flat ``key = value`` files, LD/HD presets, validation
and community assignment.

Example file::

    # high density run with the flooding baseline
    preset = HD
    protocol = flooding
    seed = 7
    bs_positions = 1200,0; 800,10.5

Blank values mean "unset" (use the derived default). Unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .mobility import RoadSpec
from .protocol import CriticalEvent
from .social import SocialProfile

PROTOCOLS = ("sociable", "flooding")

COMMUNITY_TAG = ("route-a", "slot-am")

# Along-road distance from the event to the default base station.
DEFAULT_BS_OFFSET = 200.0


class ConfigError(ValueError):
    def __init__(self, key: str | None, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


@dataclass(frozen=True)
class ScenarioConfig:
    preset: str = "LD"
    seed: int = 1
    protocol: str = "sociable"
    duration: float = 540.0
    # critical event; a blank location puts it mid-road
    event_start: float = 30.0
    event_duration: float = 480.0
    event_radius: float = 30.0
    event_x: float | None = None
    event_y: float | None = None
    # mobility: a trace file replaces the synthetic road
    trace_path: str | None = None
    vehicle_count: int = 91
    lane_count: int = 3
    directions: str = "one-way"
    lane_length: float = 2000.0
    lane_spacing: float = 3.5
    speed_min: float = 10.0
    speed_max: float = 20.0
    spawn_rate: float | None = None
    # radio and infrastructure
    transmission_range: float = 100.0
    bs_positions: tuple[tuple[float, float], ...] | None = None
    # social layer and protocol
    relationship_rate: float = 0.9
    ttl_initial: int = 3
    w_ec_min: float = 0.1
    w_ec_max: float = 0.9
    fixed_w_ec: float | None = None
    snapshot_hops: int = 2
    # timing
    beacon_period: float = 1.0
    monitor_rate: float = 1.0
    neighbor_staleness: float = 3.0
    hop_latency: float = 0.002
    mobility_tick: float = 0.1
    bucket_width: float = 10.0

    def __post_init__(self):
        validate(self)

    @property
    def road(self) -> RoadSpec:
        return RoadSpec(
            lane_count=self.lane_count,
            directions=self.directions,
            lane_length=self.lane_length,
            lane_spacing=self.lane_spacing,
            speed_range=(self.speed_min, self.speed_max),
            spawn_rate=self.spawn_rate,
        )

    @property
    def event_location(self) -> tuple[float, float]:
        cx, cy = self.road.center
        return (
            cx if self.event_x is None else self.event_x,
            cy if self.event_y is None else self.event_y,
        )

    @property
    def event(self) -> CriticalEvent:
        return CriticalEvent(
            "ev0", self.event_location, self.event_radius, self.event_start, self.event_duration
        )

    @property
    def base_stations(self) -> tuple[tuple[float, float], ...]:
        if self.bs_positions is not None:
            return self.bs_positions
        ex, _ = self.event_location
        _, cy = self.road.center
        return ((ex + DEFAULT_BS_OFFSET, cy),)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


PRESETS: dict[str, dict[str, Any]] = {
    "LD": dict(vehicle_count=91, lane_count=3, directions="one-way"),
    "HD": dict(vehicle_count=754, lane_count=6, directions="two-way"),
}

_POSITIVE = (
    "duration",
    "event_duration",
    "event_radius",
    "lane_length",
    "speed_min",
    "speed_max",
    "transmission_range",
    "beacon_period",
    "monitor_rate",
    "neighbor_staleness",
    "mobility_tick",
    "bucket_width",
)


def validate(c: ScenarioConfig) -> None:
    def need(cond: bool, key: str, msg: str):
        if not cond:
            raise ConfigError(key, msg)

    need(c.preset in PRESETS, "preset", f"must be one of {sorted(PRESETS)}, got {c.preset!r}")
    need(c.protocol in PROTOCOLS, "protocol", f"must be one of {PROTOCOLS}, got {c.protocol!r}")
    for key in _POSITIVE:
        value = getattr(c, key)
        need(value > 0 and math.isfinite(value), key, f"must be positive, got {value!r}")
    need(c.event_start >= 0, "event_start", "must be >= 0")
    need(c.hop_latency >= 0, "hop_latency", "must be >= 0")
    need(c.lane_spacing >= 0, "lane_spacing", "must be >= 0")
    need(c.speed_min <= c.speed_max, "speed_min", "must not exceed speed_max")
    need(c.vehicle_count >= 0, "vehicle_count", "must be >= 0")
    need(c.lane_count >= 1, "lane_count", "must be >= 1")
    need(c.directions in ("one-way", "two-way"), "directions", "must be one-way or two-way")
    need(
        c.directions == "one-way" or c.lane_count >= 2,
        "lane_count",
        "two-way roads need at least 2 lanes",
    )
    need(c.spawn_rate is None or c.spawn_rate >= 0, "spawn_rate", "must be >= 0")
    need(0.0 <= c.relationship_rate <= 1.0, "relationship_rate", "must lie in [0, 1]")
    need(c.ttl_initial >= 1, "ttl_initial", "must be >= 1")
    need(c.snapshot_hops >= 1, "snapshot_hops", "must be >= 1")
    need(
        0.0 <= c.w_ec_min <= c.w_ec_max <= 1.0,
        "w_ec_min",
        "need 0 <= w_ec_min <= w_ec_max <= 1",
    )
    need(c.fixed_w_ec is None or 0.0 <= c.fixed_w_ec <= 1.0, "fixed_w_ec", "must lie in [0, 1]")
    need(c.bs_positions is None or len(c.bs_positions) > 0, "bs_positions", "must be nonempty")


def _parse_positions(raw: str) -> tuple[tuple[float, float], ...]:
    out = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 2:
            raise ValueError(f"expected 'x,y', got {chunk!r}")
        out.append((float(parts[0]), float(parts[1])))
    return tuple(out)


def _format_positions(value) -> str:
    return "; ".join(f"{x!r},{y!r}" for x, y in value)


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def parse_value(key: str, raw: str) -> Any:
    if key not in _FIELD_TYPES:
        raise ConfigError(key, "unknown key")
    raw = raw.strip()
    ftype = _FIELD_TYPES[key]
    optional = "None" in ftype
    if raw == "" or raw.lower() == "none":
        if optional:
            return None
        raise ConfigError(key, "a value is required")
    try:
        if key == "bs_positions":
            return _parse_positions(raw)
        if ftype.startswith("int"):
            return int(raw)
        if ftype.startswith("float"):
            return float(raw)
        if key in ("preset",):
            return raw.upper()
        if key in ("protocol",):
            return raw.lower()
        return raw
    except ValueError as exc:
        raise ConfigError(key, f"cannot parse {raw!r}: {exc}") from None


def format_value(key: str, value: Any) -> str:
    if value is None:
        return ""
    if key == "bs_positions":
        return _format_positions(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_from_mapping(values: dict[str, Any]) -> ScenarioConfig:
    """Build a config; the preset's values sit between the defaults and ``values``."""
    unknown = set(values) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    preset = str(values.get("preset", ScenarioConfig.preset)).upper()
    if preset not in PRESETS:
        raise ConfigError("preset", f"must be one of {sorted(PRESETS)}, got {preset!r}")
    merged = {**PRESETS[preset], **values, "preset": preset}
    return ScenarioConfig(**merged)


def parse_config_values(text: str, source: str = "<string>") -> dict[str, Any]:
    """The keys a config text sets, parsed but not yet merged or validated."""
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(None, f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(key, f"{source}:{lineno}: duplicate key")
        values[key] = parse_value(key, raw)
    return values


def parse_config_text(text: str, source: str = "<string>") -> ScenarioConfig:
    return config_from_mapping(parse_config_values(text, source))


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), str(path))


def dump_config(c: ScenarioConfig) -> str:
    return "".join(f"{f.name} = {format_value(f.name, getattr(c, f.name))}\n" for f in fields(c))


def preset(name: str, **overrides) -> ScenarioConfig:
    return config_from_mapping({"preset": name, **overrides})


def assign_communities(vehicle_ids, rate: float, rng) -> dict[str, SocialProfile]:
    """Give ``round(rate * n)`` vehicles the shared routine; everyone else a private one."""
    ids = sorted(vehicle_ids)
    n_members = round(rate * len(ids))
    chosen = set()
    if n_members:
        picks = rng.choice(len(ids), size=n_members, replace=False)
        chosen = {ids[i] for i in picks}
    shared = SocialProfile.of(COMMUNITY_TAG)
    return {
        vid: shared if vid in chosen else SocialProfile.of((f"area-{vid}", f"slot-{vid}"))
        for vid in ids
    }
