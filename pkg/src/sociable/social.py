"""Social layer: routine profiles, community neighbor tables, contact-graph
snapshots and the structural-influence (STR) relay score.

STR is a weighted sum of four normalized centralities of a candidate in a
local contact graph::

    STR = w_bc * BC + w_cc * CC + w_dc * DC + w_ec * EC

``EC`` here is *not* an eigenvector computation.  Importance is defined as
direct reach of a base station, so ``EC(v)`` is the fraction of the
snapshot's gateways that are adjacent to ``v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class SocialProfile:
    """Set of ``(area, timeslot)`` routine tags."""

    routine_tags: frozenset[tuple[str, str]] = frozenset()

    @classmethod
    def of(cls, *tags: tuple[str, str]) -> "SocialProfile":
        return cls(frozenset(tags))


def sor_match(p1: SocialProfile, p2: SocialProfile) -> bool:
    """Two vehicles hold a social relationship iff they share a routine tag."""
    return not p1.routine_tags.isdisjoint(p2.routine_tags)


@dataclass(frozen=True)
class Beacon:
    sender_id: str
    position: tuple[float, float]
    neighbor_count: int
    profile: SocialProfile


@dataclass
class NeighborEntry:
    vehicle_id: str
    last_position: tuple[float, float]
    neighbor_count_reported: int
    profile: SocialProfile
    last_heard: float


def handle_beacon(
    owner_profile: SocialProfile,
    neighbors: dict[str, NeighborEntry],
    beacon: Beacon,
    now: float,
) -> dict[str, NeighborEntry]:
    """Upsert the sender into ``neighbors`` when profiles match. Mutates and returns it."""
    if not sor_match(owner_profile, beacon.profile):
        return neighbors
    return record_beacon(neighbors, beacon, now)


def record_beacon(
    neighbors: dict[str, NeighborEntry], beacon: Beacon, now: float
) -> dict[str, NeighborEntry]:
    """Upsert without the relationship check, for callers that filtered already."""
    entry = neighbors.get(beacon.sender_id)
    if entry is None:
        neighbors[beacon.sender_id] = NeighborEntry(
            beacon.sender_id, beacon.position, beacon.neighbor_count, beacon.profile, now
        )
    else:
        entry.last_position = beacon.position
        entry.neighbor_count_reported = beacon.neighbor_count
        entry.profile = beacon.profile
        entry.last_heard = now
    return neighbors


def expire_neighbors(
    neighbors: dict[str, NeighborEntry], now: float, staleness: float
) -> dict[str, NeighborEntry]:
    stale = [vid for vid, e in neighbors.items() if now - e.last_heard > staleness]
    for vid in stale:
        del neighbors[vid]
    return neighbors


@dataclass(frozen=True, eq=False)
class GraphSnapshot:
    """Undirected contact graph over community members.

    ``adjacency`` is a symmetric boolean matrix indexed like ``nodes``.
    """

    nodes: tuple[str, ...]
    adjacency: np.ndarray
    gateway: np.ndarray
    index: Mapping[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.nodes)
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.shape != (n, n):
            raise ValueError(f"adjacency shape {adj.shape} does not match {n} nodes")
        if n and (adj.diagonal().any() or not np.array_equal(adj, adj.T)):
            raise ValueError("adjacency must be symmetric without self-loops")
        gw = np.asarray(self.gateway, dtype=bool)
        if gw.shape != (n,):
            raise ValueError("gateway flags must have one entry per node")
        if len(set(self.nodes)) != n:
            raise ValueError("duplicate node ids")
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "gateway", gw)
        object.__setattr__(self, "index", {v: i for i, v in enumerate(self.nodes)})

    @classmethod
    def from_edges(
        cls,
        nodes: Iterable[str],
        edges: Iterable[tuple[str, str]],
        gateways: Iterable[str] = (),
    ) -> "GraphSnapshot":
        nodes = tuple(nodes)
        index = {v: i for i, v in enumerate(nodes)}
        adj = np.zeros((len(nodes), len(nodes)), dtype=bool)
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-loop on {a!r}")
            adj[index[a], index[b]] = adj[index[b], index[a]] = True
        gw = np.zeros(len(nodes), dtype=bool)
        for g in gateways:
            gw[index[g]] = True
        return cls(nodes, adj, gw)

    @property
    def edges(self) -> set[tuple[str, str]]:
        i, j = np.nonzero(np.triu(self.adjacency))
        return {tuple(sorted((self.nodes[a], self.nodes[b]))) for a, b in zip(i, j)}

    @property
    def gateway_flags(self) -> dict[str, bool]:
        return {v: bool(g) for v, g in zip(self.nodes, self.gateway)}

    def neighbors(self, v: str) -> list[str]:
        row = self.adjacency[self._idx(v)]
        return [self.nodes[j] for j in np.nonzero(row)[0]]

    def _idx(self, v: str) -> int:
        try:
            return self.index[v]
        except KeyError:
            raise KeyError(f"vehicle {v!r} is not in the snapshot") from None

    @cached_property
    def _shortest_paths(self) -> tuple[np.ndarray, np.ndarray]:
        """All-sources BFS: hop distances (-1 when unreachable) and path counts."""
        n = len(self.nodes)
        A = self.adjacency.astype(float)
        dist = np.full((n, n), -1, dtype=np.int64)
        sigma = np.zeros((n, n))
        np.fill_diagonal(dist, 0)
        np.fill_diagonal(sigma, 1.0)
        frontier = np.eye(n)
        level = 0
        while True:
            nxt = frontier @ A
            nxt[dist >= 0] = 0.0
            hit = nxt > 0
            if not hit.any():
                break
            level += 1
            dist[hit] = level
            sigma[hit] = nxt[hit]
            frontier = nxt
        return dist, sigma

    @cached_property
    def _betweenness(self) -> np.ndarray:
        # Brandes dependency accumulation, run for every source at once,
        # one BFS level at a time from the deepest level back to the sources.
        n = len(self.nodes)
        if n < 3:
            return np.zeros(n)
        A = self.adjacency.astype(float)
        dist, sigma = self._shortest_paths
        delta = np.zeros((n, n))
        for level in range(int(dist.max()), 1, -1):
            at_level = dist == level
            coef = np.where(at_level, (1.0 + delta) / np.where(at_level, sigma, 1.0), 0.0)
            pulled = coef @ A
            parent = dist == level - 1
            delta[parent] += sigma[parent] * pulled[parent]
        raw = delta.sum(axis=0)  # each unordered pair counted from both ends
        return raw / ((n - 1) * (n - 2))

    @cached_property
    def _closeness(self) -> np.ndarray:
        n = len(self.nodes)
        if n < 2:
            return np.zeros(n)
        dist, _ = self._shortest_paths
        reach = dist > 0
        r = reach.sum(axis=1)  # reachable nodes other than the row's own
        total = np.where(reach, dist, 0).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(total > 0, (r / total) * (r / (n - 1)), 0.0)

    @cached_property
    def _degree(self) -> np.ndarray:
        n = len(self.nodes)
        if n < 2:
            return np.zeros(n)
        return self.adjacency.sum(axis=1) / (n - 1)

    @cached_property
    def _gateway_adjacency(self) -> np.ndarray:
        total = int(self.gateway.sum())
        return (self.adjacency.astype(float) @ self.gateway.astype(float)) / max(1, total)


def degree_centrality(g: GraphSnapshot, v: str) -> float:
    return float(g._degree[g._idx(v)])


def closeness_centrality(g: GraphSnapshot, v: str) -> float:
    """Closeness scaled by the reachable fraction so disconnected graphs stay finite."""
    return float(g._closeness[g._idx(v)])


def betweenness_centrality(g: GraphSnapshot, v: str) -> float:
    return float(g._betweenness[g._idx(v)])


def eigenvector_gateway_centrality(g: GraphSnapshot, v: str) -> float:
    """Fraction of the snapshot's gateways adjacent to ``v`` (its own flag never counts)."""
    return float(g._gateway_adjacency[g._idx(v)])


@dataclass(frozen=True)
class StrWeights:
    w_bc: float
    w_cc: float
    w_dc: float
    w_ec: float

    def __post_init__(self):
        for name in ("w_bc", "w_cc", "w_dc", "w_ec"):
            w = getattr(self, name)
            if not (0.0 <= w <= 1.0) or math.isnan(w):
                raise ValueError(f"{name}={w} outside [0, 1]")
        total = self.w_bc + self.w_cc + self.w_dc + self.w_ec
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"STR weights must sum to 1, got {total!r}")

    @classmethod
    def normalized(cls, w_bc: float, w_cc: float, w_dc: float, w_ec: float) -> "StrWeights":
        total = w_bc + w_cc + w_dc + w_ec
        if not total > 0:
            raise ValueError("weights must have a positive sum")
        w_ec = w_ec / total
        w_bc, w_cc = w_bc / total, w_cc / total
        # absorb rounding in the last QoS term so the sum is exact
        return cls(w_bc, w_cc, max(0.0, 1.0 - w_bc - w_cc - w_ec), w_ec)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.w_bc, self.w_cc, self.w_dc, self.w_ec


def centrality_vector(g: GraphSnapshot, v: str) -> tuple[float, float, float, float]:
    """``(BC, CC, DC, EC)`` of ``v``."""
    i = g._idx(v)
    return (
        float(g._betweenness[i]),
        float(g._closeness[i]),
        float(g._degree[i]),
        float(g._gateway_adjacency[i]),
    )


def combine_str(components: tuple[float, float, float, float], w: StrWeights) -> float:
    bc, cc, dc, ec = components
    return w.w_bc * bc + w.w_cc * cc + w.w_dc * dc + w.w_ec * ec


def compute_str(g: GraphSnapshot, v: str, w: StrWeights) -> float:
    if not isinstance(w, StrWeights):
        raise TypeError("weights must be a StrWeights instance")
    return combine_str(centrality_vector(g, v), w)


def weight_schedule(
    hop_index: int, ttl_initial: int, w_ec_min: float = 0.1, w_ec_max: float = 0.9
) -> StrWeights:
    """STR weights for the relay chosen at ``hop_index``.

    The gateway term rises linearly from ``w_ec_min`` at the detector to
    ``w_ec_max`` at the last hop; the remainder is split evenly over BC, CC
    and DC.
    """
    if ttl_initial < 0 or not (0 <= hop_index <= ttl_initial):
        raise ValueError(f"hop_index {hop_index} outside [0, {ttl_initial}]")
    if not (0.0 <= w_ec_min <= w_ec_max <= 1.0):
        raise ValueError(f"need 0 <= w_ec_min <= w_ec_max <= 1, got {w_ec_min}, {w_ec_max}")
    frac = hop_index / max(1, ttl_initial)
    # interpolation form keeps both endpoints exact
    w_ec = w_ec_min * (1.0 - frac) + w_ec_max * frac
    qos = (1.0 - w_ec) / 3.0
    # the last QoS term takes the rounding residue so the sum is exactly 1
    return StrWeights(qos, qos, 1.0 - w_ec - 2 * qos, w_ec)


def fixed_weights(w_ec: float) -> StrWeights:
    return weight_schedule(0, 0, w_ec, w_ec)


def build_snapshot(
    center: str,
    ids: list[str],
    adjacency: np.ndarray,
    members: np.ndarray,
    gateway: np.ndarray,
    hops: int = 2,
) -> GraphSnapshot:
    """BFS over contact edges between community members, up to ``hops`` from ``center``.

    ``ids``/``adjacency``/``gateway`` describe every vehicle present; ``members``
    masks the ones socially related to ``center``.  ``center`` is always kept.
    """
    index = {v: i for i, v in enumerate(ids)}
    if center not in index:
        raise KeyError(f"vehicle {center!r} is not present")
    c = index[center]
    allowed = np.asarray(members, dtype=bool).copy()
    allowed[c] = True
    seen = np.zeros(len(ids), dtype=bool)
    seen[c] = True
    frontier = seen.copy()
    for _ in range(hops):
        reached = adjacency[frontier].any(axis=0) & allowed & ~seen
        if not reached.any():
            break
        seen |= reached
        frontier = reached
    sel = np.nonzero(seen)[0]  # ascending index == ascending id
    sub = adjacency[np.ix_(sel, sel)]
    return GraphSnapshot(tuple(ids[i] for i in sel), sub, np.asarray(gateway, dtype=bool)[sel])
