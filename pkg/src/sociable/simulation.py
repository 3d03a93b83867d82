"""Scenario runner: drives mobility, beaconing, detection and packet delivery
on top of the event kernel, and collects metrics."""

from __future__ import annotations

import logging
import math

import numpy as np

from .config import ScenarioConfig, assign_communities
from .kernel import EventKind, EventQueue, RngState, SimClock, tick_times
from .metrics import DeliveryLogEntry, MetricsCollector, MetricsReport
from .mobility import Trace, generate_road, load_trace
from .protocol import (
    Broadcast,
    DeliverToBS,
    Discard,
    LogEntry,
    MonitoringPacket,
    RelayPolicy,
    VehicleState,
    detect,
    flooding_handle,
    handle_monitoring,
)
from .social import (
    Beacon,
    GraphSnapshot,
    SocialProfile,
    build_snapshot,
    expire_neighbors,
    record_beacon,
    sor_match,
)

log = logging.getLogger(__name__)

# same-instant ordering of periodic work
_TICK_ORDER = {EventKind.MOBILITY_TICK: 0, EventKind.BEACON_TICK: 1, EventKind.DETECTION_CHECK: 2}


def build_trace(config: ScenarioConfig, rng: RngState) -> Trace:
    if config.trace_path:
        return Trace(load_trace(config.trace_path))
    rows = generate_road(
        config.road, rng.stream("mobility"), config.duration, vehicle_count=config.vehicle_count
    )
    return Trace(rows)


class Simulation:
    """One run of one protocol over one scenario.

    ``trace`` and ``profiles`` default to what ``config`` and its seed
    produce; tests pass hand-built ones.
    """

    def __init__(
        self,
        config: ScenarioConfig,
        trace: Trace | None = None,
        profiles: dict[str, SocialProfile] | None = None,
        keep_log: bool = False,
    ):
        self.config = config
        self.rng = RngState(config.seed)
        self.trace = trace if trace is not None else build_trace(config, self.rng)
        if profiles is None:
            profiles = assign_communities(
                self.trace.vehicle_ids, config.relationship_rate, self.rng.stream("community")
            )
        missing = set(self.trace.vehicle_ids) - set(profiles)
        if missing:
            raise ValueError(f"no social profile for vehicles {sorted(missing)[:5]}")
        self.profiles = profiles
        self.event = config.event
        self.bs = np.array(config.base_stations, dtype=float).reshape(-1, 2)
        self.range = config.transmission_range
        self.policy = RelayPolicy(config.w_ec_min, config.w_ec_max, config.fixed_w_ec)
        self.sociable = config.protocol == "sociable"

        self.clock = SimClock(end=config.duration)
        self.queue = EventQueue(self.clock)
        self.metrics = MetricsCollector(config.duration, config.bucket_width)
        self.keep_log = keep_log
        self.log: list[LogEntry] = []
        self.vehicles: dict[str, VehicleState] = {}

        # world state at the last mobility tick
        self.ids: list[str] = []
        self.index: dict[str, int] = {}
        self.pos = np.empty((0, 2))
        self.vel = np.empty((0, 2))
        self._adj: np.ndarray | None = None
        self._in_bs: np.ndarray | None = None
        self._members: dict[SocialProfile, np.ndarray] = {}
        # profiles interned to small ints, with a pairwise relationship table
        distinct = sorted(set(profiles.values()), key=lambda p: sorted(p.routine_tags))
        lookup = {p: k for k, p in enumerate(distinct)}
        self._pid = {vid: lookup[p] for vid, p in profiles.items()}
        self._related = np.array(
            [[sor_match(a, b) for b in distinct] for a in distinct], dtype=bool
        ).reshape(len(distinct), len(distinct))
        self._pids = np.zeros(0, dtype=np.int64)
        self.ran = False

    # -- world queries (used by protocol handlers) -------------------------

    @property
    def adjacency(self) -> np.ndarray:
        if self._adj is None:
            n = len(self.ids)
            if n == 0:
                self._adj = np.zeros((0, 0), dtype=bool)
            else:
                diff = self.pos[:, None, :] - self.pos[None, :, :]
                d2 = np.einsum("ijk,ijk->ij", diff, diff)
                adj = d2 <= self.range * self.range
                np.fill_diagonal(adj, False)
                self._adj = adj
        return self._adj

    @property
    def gateway_mask(self) -> np.ndarray:
        if self._in_bs is None:
            if len(self.ids) == 0:
                self._in_bs = np.zeros(0, dtype=bool)
            else:
                diff = self.pos[:, None, :] - self.bs[None, :, :]
                d2 = np.einsum("ijk,ijk->ij", diff, diff)
                self._in_bs = (d2 <= self.range * self.range).any(axis=1)
        return self._in_bs

    def in_bs_range(self, vehicle_id: str) -> bool:
        i = self.index.get(vehicle_id)
        return i is not None and bool(self.gateway_mask[i])

    def community_mask(self, community: SocialProfile) -> np.ndarray:
        mask = self._members.get(community)
        if mask is None:
            mask = np.fromiter(
                (sor_match(self.profiles[v], community) for v in self.ids), dtype=bool, count=len(self.ids)
            )
            self._members[community] = mask
        return mask

    def snapshot(self, vehicle_id: str, community: SocialProfile) -> GraphSnapshot:
        return build_snapshot(
            vehicle_id,
            self.ids,
            self.adjacency,
            self.community_mask(community),
            self.gateway_mask,
            self.config.snapshot_hops,
        )

    # -- event handlers ----------------------------------------------------

    def _mobility_tick(self, t: float) -> None:
        ids, pos, vel = self.trace.positions_at(t)
        self.ids = ids
        self.index = {v: i for i, v in enumerate(ids)}
        self.pos = pos
        self.vel = vel
        self._adj = None
        self._in_bs = None
        self._members = {}
        self._pids = np.fromiter((self._pid[v] for v in ids), dtype=np.int64, count=len(ids))
        for vid in ids:
            if vid not in self.vehicles:
                self.vehicles[vid] = VehicleState(vid, self.profiles[vid])

    def _sync_state(self, i: int) -> VehicleState:
        """Copy the tick's kinematics into a vehicle's state object."""
        v = self.vehicles[self.ids[i]]
        v.position = (float(self.pos[i, 0]), float(self.pos[i, 1]))
        v.velocity = (float(self.vel[i, 0]), float(self.vel[i, 1]))
        return v

    def _beacon_tick(self, t: float) -> None:
        n = len(self.ids)
        if n == 0:
            return
        self.metrics.record_transmission("beacon", t, count=n)
        pos = self.pos.tolist()
        vehicles = [self.vehicles[vid] for vid in self.ids]
        beacons = [
            Beacon(v.vehicle_id, tuple(pos[i]), len(v.neighbors), v.profile)
            for i, v in enumerate(vehicles)
        ]
        related = self.adjacency & self._related[np.ix_(self._pids, self._pids)]
        receivers, senders = np.nonzero(related)
        for r, s in zip(receivers.tolist(), senders.tolist()):
            record_beacon(vehicles[r].neighbors, beacons[s], t)
        for vid in self.ids:
            expire_neighbors(self.vehicles[vid].neighbors, t, self.config.neighbor_staleness)

    def _detection_check(self, t: float) -> None:
        if not self.event.active(t) or not self.ids:
            return
        ex, ey = self.event.location
        near = np.hypot(self.pos[:, 0] - ex, self.pos[:, 1] - ey) <= self.event.radius
        for i, vid in enumerate(self.ids):
            if not near[i]:
                self.vehicles[vid].detect_start = None
                continue
            v = self._sync_state(i)
            pkt = detect(v, self.event, t, self.config.ttl_initial)
            if pkt is None:
                continue
            self.metrics.record_generated(t)
            self.metrics.record_collaborator(vid, t)
            self._log(t, vid, "detect", pkt)
            self._process(v, pkt, t)

    def _packet_arrival(self, t: float, payload) -> None:
        pkt, receivers = payload
        for vid in receivers:
            if vid not in self.index:
                continue  # left the road in flight
            self._process(self.vehicles[vid], pkt, t)

    # -- protocol glue -----------------------------------------------------

    def _process(self, v: VehicleState, pkt: MonitoringPacket, t: float) -> None:
        if self.sociable:
            actions = handle_monitoring(v, pkt, t, self, self.policy)
        else:
            actions = flooding_handle(v, pkt, t, self)
        vid = v.vehicle_id
        designated = pkt.next_relay_id == vid
        for action in actions:
            if isinstance(action, DeliverToBS):
                self.metrics.record_delivery(
                    DeliveryLogEntry(
                        pkt.event_id,
                        pkt.origin_detector_id,
                        pkt.sequence,
                        pkt.event_context.detect_time,
                        t,
                        vid,
                        pkt.hop_index,
                    )
                )
                self.metrics.record_collaborator(vid, t)
                self._log(t, vid, "deliver", pkt, designated=designated, gateway=True)
            elif isinstance(action, Broadcast):
                out = action.packet
                self.metrics.record_transmission("monitoring", t)
                self.metrics.record_collaborator(vid, t)
                self._log(t, vid, "broadcast", out, designated=designated)
                self._transmit(vid, out, t)
            elif isinstance(action, Discard):
                gateway = (
                    action.reason != "duplicate"
                    and self.in_bs_range(vid)
                    and sor_match(v.profile, pkt.community)
                )
                if gateway:
                    self.metrics.record_collaborator(vid, t)
                if self.keep_log:
                    self._log(
                        t, vid, "discard", pkt, reason=action.reason, designated=designated, gateway=gateway
                    )

    def _transmit(self, sender: str, pkt: MonitoringPacket, t: float) -> None:
        i = self.index[sender]
        receivers = tuple(self.ids[j] for j in np.nonzero(self.adjacency[i])[0])
        arrival = t + self.config.hop_latency
        if receivers and arrival <= self.clock.end:
            self.queue.schedule(arrival, EventKind.PACKET_ARRIVAL, (pkt, receivers))

    def _log(self, t, vid, kind, pkt, reason=None, designated=False, gateway=False) -> None:
        if self.keep_log:
            self.log.append(
                LogEntry(
                    t,
                    vid,
                    kind,
                    pkt.event_id,
                    pkt.origin_detector_id,
                    pkt.sequence,
                    pkt.ttl,
                    pkt.hop_index,
                    pkt.next_relay_id,
                    reason,
                    designated,
                    gateway,
                )
            )

    # -- run loop ----------------------------------------------------------

    def _schedule_periodic(self) -> None:
        c = self.config
        ev_end = min(self.event.start + self.event.duration, c.duration)
        periodic = [(t, EventKind.MOBILITY_TICK) for t in tick_times(c.mobility_tick, 0.0, c.duration)]
        periodic += [(t, EventKind.BEACON_TICK) for t in tick_times(c.beacon_period, 0.0, c.duration)]
        periodic += [
            (t, EventKind.DETECTION_CHECK)
            for t in tick_times(1.0 / c.monitor_rate, self.event.start, ev_end)
        ]
        periodic.sort(key=lambda p: (p[0], _TICK_ORDER[p[1]]))
        for t, kind in periodic:
            self.queue.schedule(t, kind)
        self.queue.schedule(c.duration, EventKind.SIM_END)

    def run(self) -> MetricsReport:
        if self.ran:
            raise RuntimeError("a Simulation instance runs once")
        self.ran = True
        self._schedule_periodic()
        handlers = {
            EventKind.MOBILITY_TICK: lambda ev: self._mobility_tick(ev.timestamp),
            EventKind.BEACON_TICK: lambda ev: self._beacon_tick(ev.timestamp),
            EventKind.DETECTION_CHECK: lambda ev: self._detection_check(ev.timestamp),
            EventKind.PACKET_ARRIVAL: lambda ev: self._packet_arrival(ev.timestamp, ev.payload),
        }
        while self.queue:
            ev = self.queue.pop()
            if ev.kind is EventKind.SIM_END:
                break
            handlers[ev.kind](ev)
        m = self.metrics
        log.debug(
            "%s seed=%d: %d beacons, %d monitoring tx, %d deliveries",
            self.config.protocol, self.config.seed, m.beacons, m.monitoring_tx, len(m.deliveries),
        )
        return MetricsReport(
            protocol=self.config.protocol,
            seed=self.config.seed,
            records=m.records(),
            deliveries=list(m.deliveries),
            ncv_total=len(m.all_collaborators),
            beacons=m.beacons,
            monitoring_tx=m.monitoring_tx,
            log=self.log,
        )


def run(config: ScenarioConfig, keep_log: bool = False) -> MetricsReport:
    return Simulation(config, keep_log=keep_log).run()
