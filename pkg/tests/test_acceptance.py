"""End-to-end acceptance checks.  Each test records a one-line verdict that is
printed in the terminal summary."""

import itertools
import random
import statistics
import time

import numpy as np
import pytest

import fig4
import oracles
from sociable.config import preset
from sociable.experiments import DEFAULT_SWEEP, run_comparison, run_sweep, spearman
from sociable.metrics import records_csv
from sociable.protocol import (
    Broadcast,
    CriticalEvent,
    RelayPolicy,
    VehicleState,
    collaborator_set,
    detect,
    flooding_handle,
    handle_monitoring,
)
from sociable.simulation import run
from sociable.social import (
    GraphSnapshot,
    NeighborEntry,
    SocialProfile,
    betweenness_centrality,
    build_snapshot,
    closeness_centrality,
    sor_match,
    degree_centrality,
    eigenvector_gateway_centrality,
    weight_schedule,
)

SEEDS = (1, 2, 3, 4, 5)


# -- 1. centralities against brute force -------------------------------------


def _connected(nodes, edges):
    adj = oracles.adjacency_lists(nodes, edges)
    return len(oracles.bfs_distances(adj, nodes[0])) == len(nodes)


def _graphs():
    """Every labelled connected graph on 1..5 nodes, then random ones on 6..8."""
    for n in range(1, 6):
        nodes = [f"n{i}" for i in range(n)]
        pairs = list(itertools.combinations(nodes, 2))
        for mask in range(1 << len(pairs)):
            edges = [p for k, p in enumerate(pairs) if mask >> k & 1]
            if _connected(nodes, edges):
                yield nodes, edges
    rng = random.Random(20240601)
    for n in (6, 7, 8):
        nodes = [f"n{i}" for i in range(n)]
        pairs = list(itertools.combinations(nodes, 2))
        made = 0
        while made < 200:
            p = rng.uniform(0.15, 0.9)
            edges = [e for e in pairs if rng.random() < p]
            if _connected(nodes, edges):
                made += 1
                yield nodes, edges


def test_criterion_1_centrality_oracles(verdict):
    start = time.perf_counter()
    rng = random.Random(7)
    worst, count, random_count = 0.0, 0, 0
    for nodes, edges in _graphs():
        gateways = [v for v in nodes if rng.random() < 0.4]
        g = GraphSnapshot.from_edges(nodes, edges, gateways)
        expected = (
            (betweenness_centrality, oracles.betweenness(nodes, edges)),
            (closeness_centrality, oracles.closeness(nodes, edges)),
            (degree_centrality, oracles.degree(nodes, edges)),
            (eigenvector_gateway_centrality, oracles.gateway_adjacency(nodes, edges, set(gateways))),
        )
        for fn, ref in expected:
            for v in nodes:
                worst = max(worst, abs(fn(g, v) - ref[v]))
        count += 1
        random_count += len(nodes) >= 6
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and random_count >= 500 and elapsed < 60
    verdict(
        1,
        ok,
        f"{count} connected graphs ({count - random_count} exhaustive up to 5 nodes, "
        f"{random_count} random on 6-8), max error {worst:.1e}, {elapsed:.1f}s",
    )
    assert ok


# -- 2. worked example ---------------------------------------------------------


def test_criterion_2_worked_example(verdict):
    start = time.perf_counter()
    report = fig4.simulate("sociable")
    elapsed = time.perf_counter() - start
    got = [(round(e.time, 9), e.vehicle_id, e.kind, e.ttl, e.next_relay_id, e.reason) for e in report.log]
    members = collaborator_set(report.log, "ev0")
    ok = got == fig4.GOLDEN and members == {"v1", "v3", "v6", "v7"} and elapsed < 1.0
    verdict(2, ok, f"action log {'matches' if got == fig4.GOLDEN else 'differs'}, D(ev) = {sorted(members)}, {elapsed:.3f}s")
    assert ok


# -- 3, 4, 5. paired protocol runs ---------------------------------------------


@pytest.fixture(scope="module")
def paired():
    start = time.perf_counter()
    out = {name: [run_comparison(preset(name, seed=s)) for s in SEEDS] for name in ("LD", "HD")}
    return out, time.perf_counter() - start


def test_criterion_3_epo_reduction(paired, verdict):
    runs, elapsed = paired
    reductions = {name: [c.epo_reduction_pct for c in cmps] for name, cmps in runs.items()}
    every_seed = all(c.sociable.epo < c.flooding.epo for cmps in runs.values() for c in cmps)
    ld, hd = statistics.mean(reductions["LD"]), statistics.mean(reductions["HD"])
    ok = every_seed and hd > ld and elapsed < 300
    verdict(
        3,
        ok,
        f"EPO reduction LD {ld:.2f}% HD {hd:.2f}% (seed-mean over {len(SEEDS)} seeds), "
        f"lower in every seed: {every_seed}, {elapsed:.0f}s",
    )
    assert ok


def test_criterion_4_ncv_dominance(paired, verdict):
    runs, _ = paired
    pairs = {name: [(c.sociable.ncv_max, c.flooding.ncv_max) for c in cmps] for name, cmps in runs.items()}
    ok = all(s <= f for ps in pairs.values() for s, f in ps)
    verdict(4, ok, "max NCV (sociable, flooding) per seed: " + "; ".join(f"{k} {v}" for k, v in pairs.items()))
    assert ok


def test_criterion_5_ngm_equality(paired, verdict):
    runs, _ = paired
    equal = [c.ngm_equal for cmps in runs.values() for c in cmps]
    totals = [c.sociable.ngm for cmps in runs.values() for c in cmps]
    ok = all(equal) and all(t > 0 for t in totals)
    verdict(5, ok, f"{sum(equal)}/{len(equal)} paired runs with identical NGM streams, NGM totals {totals}")
    assert ok


# -- 6. hop bound and duplicate safety -------------------------------------------


class _World:
    def __init__(self, ids, adj, members, gateway, hops):
        self.ids, self.adj, self.members, self.gateway, self.hops = ids, adj, members, gateway, hops
        self.index = {v: i for i, v in enumerate(ids)}

    def in_bs_range(self, vid):
        return bool(self.gateway[self.index[vid]])

    def snapshot(self, vid, community):
        return build_snapshot(vid, self.ids, self.adj, self.members, self.gateway, self.hops)


def _random_case(rng, protocol):
    """Disseminate a few packets over a random static topology; return every broadcast."""
    n = int(rng.integers(2, 13))
    ttl = int(rng.integers(1, 6))
    ids = [f"u{i:02d}" for i in range(n)]
    adj = np.triu(rng.random((n, n)) < rng.uniform(0.1, 0.8), 1)
    adj = adj | adj.T
    shared = SocialProfile.of(("route", "am"))
    members = rng.random(n) < rng.uniform(0.3, 1.0)
    profiles = [shared if m else SocialProfile.of((f"p{i}", "x")) for i, m in enumerate(members)]
    gateway = rng.random(n) < 0.3
    world = _World(ids, adj, members, gateway, int(rng.integers(1, 4)))
    vehicles = [VehicleState(v, profiles[i]) for i, v in enumerate(ids)]
    for i, v in enumerate(vehicles):
        for j in np.nonzero(adj[i])[0]:
            if sor_match(profiles[i], profiles[j]):
                v.neighbors[ids[j]] = NeighborEntry(ids[j], (0.0, 0.0), 0, profiles[j], 0.0)
    policy = RelayPolicy(fixed_w_ec=float(rng.uniform())) if rng.random() < 0.3 else RelayPolicy()
    event = CriticalEvent("ev", (0.0, 0.0), 1.0, 0.0, 10.0)
    broadcasts = []
    queue = []
    for step in range(int(rng.integers(1, 4))):
        for i in rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False):
            pkt = detect(vehicles[i], event, float(step), ttl)
            queue.append((i, pkt))
    while queue:
        i, pkt = queue.pop(0)
        v = vehicles[i]
        if protocol == "sociable":
            actions = handle_monitoring(v, pkt, 0.0, world, policy)
        else:
            actions = flooding_handle(v, pkt, 0.0, world)
        for a in actions:
            if isinstance(a, Broadcast):
                broadcasts.append((v.vehicle_id, a.packet))
                queue.extend((int(j), a.packet) for j in np.nonzero(adj[i])[0])
                # an echo of an old copy must be suppressed too
                queue.append((i, pkt))
    return broadcasts


def _check_broadcasts(broadcasts):
    hop_ok, dup_ok = True, True
    seen = set()
    for vid, pkt in broadcasts:
        hop_ok &= 0 <= pkt.hop_index <= pkt.ttl_initial
        key = (vid, pkt.key)
        dup_ok &= key not in seen
        seen.add(key)
    return hop_ok, dup_ok


def test_criterion_6_hop_bound_and_duplicates(verdict):
    rng = np.random.default_rng(6)
    cases, n_broadcasts = 0, 0
    hop_ok = dup_ok = True
    for k in range(10_000):
        bs = _random_case(rng, "sociable" if k % 2 == 0 else "flooding")
        h, d = _check_broadcasts(bs)
        hop_ok &= h
        dup_ok &= d
        cases += 1
        n_broadcasts += len(bs)
    # full-scale runs are checked as well
    sim_broadcasts = 0
    for s in SEEDS:
        for protocol in ("sociable", "flooding"):
            log = run(preset("LD", seed=s, protocol=protocol), keep_log=True).log
            entries = [e for e in log if e.kind == "broadcast"]
            sim_broadcasts += len(entries)
            hop_ok &= all(e.hop_index <= 3 for e in entries)
            keys = [(e.vehicle_id, e.key) for e in entries]
            dup_ok &= len(keys) == len(set(keys))
    ok = hop_ok and dup_ok and cases >= 10_000
    verdict(
        6,
        ok,
        f"{cases} random dissemination cases ({n_broadcasts} broadcasts) plus {sim_broadcasts} "
        f"broadcasts from LD runs: hop bound {hop_ok}, no double broadcast {dup_ok}",
    )
    assert ok


# -- 7. determinism -------------------------------------------------------------------


def test_criterion_7_byte_identical_output(tmp_path, verdict):
    same = []
    for protocol in ("sociable", "flooding"):
        config = preset("LD", seed=11, protocol=protocol)
        blobs = []
        for k in range(2):
            path = tmp_path / f"{protocol}{k}.csv"
            path.write_text(records_csv(run(config).records))
            blobs.append(path.read_bytes())
        same.append(blobs[0] == blobs[1])
    ok = all(same)
    verdict(7, ok, f"repeated LD runs byte-identical (sociable, flooding): {same}")
    assert ok


# -- 8. W_EC sweep ----------------------------------------------------------------------


def test_criterion_8_sweep_tendency(paired, verdict):
    runs, _ = paired
    rhos, covered = [], True
    tables = []
    for cmp in runs["HD"]:
        seed = cmp.flooding.seed
        sweep = run_sweep(preset("HD", seed=seed), DEFAULT_SWEEP)
        rhos.append(sweep.spearman())
        if cmp.flooding.ndm > 0:
            covered &= all(r.ndm > 0 for r in sweep.rows)
        tables.append(f"seed {seed}: " + " ".join(f"{r.add_ms:.3f}" if r.add_ms is not None else "-" for r in sweep.rows))
    defined = [r for r in rhos if r is not None]
    mean_rho = statistics.mean(defined) if len(defined) == len(rhos) else None
    ok = mean_rho is not None and mean_rho <= 0 and covered
    rho_text = "undefined" if mean_rho is None else f"{mean_rho:+.3f}"
    verdict(
        8,
        ok,
        f"seed-mean Spearman(W_EC, ADD) {rho_text} (per seed {[None if r is None else round(r, 3) for r in rhos]}), "
        f"deliveries at every sweep point: {covered}; ADD ms by W_EC 0.1..0.9 | " + " | ".join(tables),
    )
    assert ok


# -- 9. weight schedule ---------------------------------------------------------------


def test_criterion_9_weight_schedule(verdict):
    rng = random.Random(9)
    ends = (weight_schedule(0, 3).w_ec, weight_schedule(3, 3).w_ec)
    worst = 0.0
    for _ in range(1000):
        ttl = rng.randint(0, 50)
        hop = rng.randint(0, ttl)
        w = weight_schedule(hop, ttl)
        worst = max(worst, abs(sum(w.as_tuple()) - 1.0))
    ok = ends == (0.1, 0.9) and worst <= 1e-12
    verdict(9, ok, f"endpoints {ends}, max |sum - 1| over 1000 random (hop, ttl) pairs {worst:.1e}")
    assert ok
