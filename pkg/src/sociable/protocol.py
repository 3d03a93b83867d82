"""Detection and dissemination: the SOCIABLE relay protocol and a
restricted-flooding baseline.

Handlers are transitions ``(vehicle state, packet) -> actions``; the
simulator's network layer turns ``Broadcast`` actions into receptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Protocol

from .social import (
    GraphSnapshot,
    NeighborEntry,
    SocialProfile,
    StrWeights,
    centrality_vector,
    combine_str,
    sor_match,
    weight_schedule,
)

PacketKey = tuple[str, str, int]  # (event_id, origin detector, sequence)


@dataclass(frozen=True)
class CriticalEvent:
    event_id: str
    location: tuple[float, float]
    radius: float
    start: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("event duration must be positive")
        if not self.radius > 0:
            raise ValueError("event radius must be positive")

    def active(self, now: float) -> bool:
        return self.start <= now < self.start + self.duration


@dataclass(frozen=True)
class EventContext:
    detect_time: float
    location: tuple[float, float]
    speed: float
    direction: float


@dataclass(frozen=True)
class MonitoringPacket:
    event_id: str
    origin_detector_id: str
    sequence: int
    ttl: int
    ttl_initial: int
    hop_index: int
    next_relay_id: str | None
    event_context: EventContext
    created_at: float
    # routine tags of the originating detector; decides who may cooperate
    community: SocialProfile = SocialProfile()
    # last transmitter, never offered as the next relay
    sender_id: str | None = None

    def __post_init__(self):
        if not (0 <= self.ttl <= self.ttl_initial):
            raise ValueError(f"ttl {self.ttl} outside [0, {self.ttl_initial}]")
        if self.hop_index + self.ttl != self.ttl_initial:
            raise ValueError("hop_index + ttl must equal ttl_initial")

    @property
    def key(self) -> PacketKey:
        return (self.event_id, self.origin_detector_id, self.sequence)

    def forwarded(self, sender_id: str, next_relay_id: str | None) -> "MonitoringPacket":
        return replace(
            self,
            ttl=self.ttl - 1,
            hop_index=self.hop_index + 1,
            next_relay_id=next_relay_id,
            sender_id=sender_id,
        )


@dataclass
class RoleState:
    is_detector: bool = False
    is_relay_for: set[str] = field(default_factory=set)
    is_gateway: bool = False
    # packets this vehicle has delivered or broadcast
    seen_packets: set[PacketKey] = field(default_factory=set)


@dataclass
class VehicleState:
    vehicle_id: str
    profile: SocialProfile
    position: tuple[float, float] = (0.0, 0.0)
    velocity: tuple[float, float] = (0.0, 0.0)
    neighbors: dict[str, NeighborEntry] = field(default_factory=dict)
    roles: RoleState = field(default_factory=RoleState)
    detect_start: float | None = None
    next_sequence: int = 0


@dataclass(frozen=True)
class DeliverToBS:
    pass


@dataclass(frozen=True)
class Broadcast:
    packet: MonitoringPacket


@dataclass(frozen=True)
class Discard:
    reason: str


Action = DeliverToBS | Broadcast | Discard


class World(Protocol):
    """What a handler may ask of the network layer about the present instant."""

    def in_bs_range(self, vehicle_id: str) -> bool: ...

    def snapshot(self, vehicle_id: str, community: SocialProfile) -> GraphSnapshot: ...


@dataclass(frozen=True)
class RelayPolicy:
    """How STR weights are chosen; ``fixed_w_ec`` pins them for sweeps."""

    w_ec_min: float = 0.1
    w_ec_max: float = 0.9
    fixed_w_ec: float | None = None

    def weights(self, hop_index: int, ttl_initial: int) -> StrWeights:
        if self.fixed_w_ec is not None:
            return weight_schedule(0, 0, self.fixed_w_ec, self.fixed_w_ec)
        return weight_schedule(hop_index, ttl_initial, self.w_ec_min, self.w_ec_max)


def detect(
    v: VehicleState,
    ev: CriticalEvent,
    now: float,
    ttl_initial: int = 3,
) -> MonitoringPacket | None:
    """Create a monitoring packet if ``v`` can see the event at ``now``."""
    if not ev.active(now):
        v.detect_start = None
        return None
    dx = v.position[0] - ev.location[0]
    dy = v.position[1] - ev.location[1]
    if math.hypot(dx, dy) > ev.radius:
        v.detect_start = None
        return None
    if v.detect_start is None:
        v.detect_start = now
    v.roles.is_detector = True
    vx, vy = v.velocity
    ctx = EventContext(
        detect_time=now,
        location=v.position,
        speed=math.hypot(vx, vy),
        direction=math.atan2(vy, vx),
    )
    pkt = MonitoringPacket(
        event_id=ev.event_id,
        origin_detector_id=v.vehicle_id,
        sequence=v.next_sequence,
        ttl=ttl_initial,
        ttl_initial=ttl_initial,
        hop_index=0,
        next_relay_id=None,
        event_context=ctx,
        created_at=now,
        community=v.profile,
    )
    v.next_sequence += 1
    return pkt


def select_relay(
    v: VehicleState,
    pkt: MonitoringPacket,
    snapshot: GraphSnapshot,
    weights: StrWeights,
) -> str | None:
    """Community neighbor of ``v`` with the highest STR; ties go to the lowest id."""
    candidates = sorted(
        vid
        for vid in v.neighbors
        if vid in snapshot.index and vid != v.vehicle_id and vid != pkt.sender_id
    )
    if not candidates:
        return None
    if len(candidates) == 1:
        return candidates[0]
    best, best_score = None, -math.inf
    for vid in candidates:
        score = combine_str(centrality_vector(snapshot, vid), weights)
        if score > best_score:
            best, best_score = vid, score
    return best


def _common_checks(v: VehicleState, pkt: MonitoringPacket) -> Discard | None:
    if pkt.key in v.roles.seen_packets:
        return Discard("duplicate")
    if pkt.ttl <= 0:
        return Discard("ttl_expired")
    if not sor_match(v.profile, pkt.community):
        return Discard("not_in_community")
    return None


def handle_monitoring(
    v: VehicleState,
    pkt: MonitoringPacket,
    now: float,
    world: World,
    policy: RelayPolicy = RelayPolicy(),
) -> list[Action]:
    """One vehicle's reaction to a monitoring packet it created or received."""
    rejected = _common_checks(v, pkt)
    if rejected is not None:
        return [rejected]
    actions: list[Action] = []
    v.roles.is_gateway = world.in_bs_range(v.vehicle_id)
    if v.roles.is_gateway:
        actions.append(DeliverToBS())
    if v.vehicle_id == pkt.origin_detector_id or v.vehicle_id == pkt.next_relay_id:
        if v.vehicle_id == pkt.next_relay_id:
            v.roles.is_relay_for.add(pkt.event_id)
        snap = world.snapshot(v.vehicle_id, pkt.community)
        relay = select_relay(v, pkt, snap, policy.weights(pkt.hop_index, pkt.ttl_initial))
        actions.append(Broadcast(pkt.forwarded(v.vehicle_id, relay)))
    if not actions:
        return [Discard("not_relay")]
    v.roles.seen_packets.add(pkt.key)
    return actions


def flooding_handle(
    v: VehicleState, pkt: MonitoringPacket, now: float, world: World
) -> list[Action]:
    """Restricted flooding: every community member rebroadcasts an unseen packet once."""
    rejected = _common_checks(v, pkt)
    if rejected is not None:
        return [rejected]
    actions: list[Action] = []
    v.roles.is_gateway = world.in_bs_range(v.vehicle_id)
    if v.roles.is_gateway:
        actions.append(DeliverToBS())
    actions.append(Broadcast(pkt.forwarded(v.vehicle_id, None)))
    v.roles.seen_packets.add(pkt.key)
    return actions


@dataclass(frozen=True)
class LogEntry:
    """One protocol decision, as recorded by the simulator."""

    time: float
    vehicle_id: str
    kind: str  # detect | deliver | broadcast | discard
    event_id: str
    origin: str
    sequence: int
    ttl: int
    hop_index: int
    next_relay_id: str | None = None
    reason: str | None = None
    designated: bool = False
    # receiver is a community member within base-station range
    gateway: bool = False

    @property
    def key(self) -> PacketKey:
        return (self.event_id, self.origin, self.sequence)


COLLABORATING_KINDS = frozenset({"detect", "deliver", "broadcast"})


def is_collaboration(entry: LogEntry) -> bool:
    """Detectors, broadcasters and deliverers collaborate, and so does any
    community gateway that received the packet, even if its TTL had run out."""
    return entry.kind in COLLABORATING_KINDS or (entry.gateway and entry.reason != "duplicate")


def collaborator_set(log: Iterable[LogEntry], event_id: str) -> set[str]:
    """The cooperating set of an event: its detectors, relays and gateways."""
    return {e.vehicle_id for e in log if e.event_id == event_id and is_collaboration(e)}
