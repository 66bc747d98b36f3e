"""Brute-force reference checks for small instances.

Everything here is written with plain loops over the geometry primitives and
never calls the vectorised selection or tree code it is used to check.
Checks return an OracleReport; they only raise on misuse (unknown ids,
oversized inputs).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Set, Union

import structlog

from geocast.config import DistanceKind, KnowledgeMode, StrategyKind
from geocast.error_handling import UsageError
from geocast.geometry import (
    HyperplaneSet, contains, hyperplane_region, is_subset, l1_distance, l2_distance, orthant_of, rect_between,
)
from geocast.multicast import MulticastTree
from geocast.overlay import GossipConfig, Peer, PeerId, SelectionStrategy, Topology, knowledge_round

logger = structlog.get_logger(__name__)

ORACLE_MAX_PEERS = 500


@dataclass(frozen=True)
class Mismatch:
    peer_id: Optional[PeerId]
    expected: Any
    actual: Any
    check: str = ""


@dataclass
class OracleReport:
    subject: str
    n: int
    d: int
    mismatches: List[Mismatch] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def add(self, peer_id: Optional[PeerId], expected: Any, actual: Any, check: str = "") -> None:
        self.mismatches.append(Mismatch(peer_id, expected, actual, check))

    def summary(self) -> Dict[str, Any]:
        return {
            "subject": self.subject,
            "n": self.n,
            "d": self.d,
            "passed": self.passed,
            "mismatches": len(self.mismatches),
        }


def _enforce_cap(n: int, allow_large: bool) -> None:
    if n > ORACLE_MAX_PEERS and not allow_large:
        raise UsageError(
            f"Oracle checks are limited to {ORACLE_MAX_PEERS} peers, got {n}",
            {"n": n, "cap": ORACLE_MAX_PEERS},
        )


def _dimension(peers: Iterable[Peer]) -> int:
    for peer in peers:
        return len(peer.coord)
    return 0


def bfs_hops(graph: Mapping[PeerId, Iterable[PeerId]], src: PeerId, limit: int) -> FrozenSet[PeerId]:
    """Nodes at undirected hop distance 1..limit from src."""
    if src not in graph:
        raise UsageError(f"Unknown source node {src}")
    if limit < 0:
        raise UsageError(f"Hop limit must be >= 0, got {limit}")
    depth = {src: 0}
    queue = deque([src])
    while queue:
        node = queue.popleft()
        if depth[node] == limit:
            continue
        for nxt in graph[node]:
            if nxt not in depth:
                depth[nxt] = depth[node] + 1
                queue.append(nxt)
    return frozenset(node for node in depth if node != src)


# ----------------------------------------------------------------------
# Reference selection
# ----------------------------------------------------------------------

def brute_empty_rect(peer: Peer, candidates: Iterable[Peer]) -> FrozenSet[PeerId]:
    """Q is kept when no other candidate lies in the closed box spanned by peer and Q."""
    pool = sorted(candidates, key=lambda q: (l1_distance(peer.coord, q.coord), q.id))
    chosen: Set[PeerId] = set()
    for i, q in enumerate(pool):
        orthant_of(peer.coord, q.coord)  # raises on shared coordinates
        box = rect_between(peer.coord, q.coord)
        # anything inside the box is strictly closer in L1
        if not any(contains(box, r.coord) for r in pool[:i]):
            chosen.add(q.id)
    return frozenset(chosen)


def _distance(strategy: SelectionStrategy, a: Sequence[float], b: Sequence[float]) -> float:
    return l2_distance(a, b) if strategy.distance is DistanceKind.L2 else l1_distance(a, b)


def brute_hyperplanes(peer: Peer, candidates: Iterable[Peer], planes: HyperplaneSet, k: int,
                      strategy: SelectionStrategy) -> FrozenSet[PeerId]:
    regions: Dict[tuple, List[tuple]] = {}
    for q in candidates:
        offset = [b - a for a, b in zip(peer.coord, q.coord)]
        region = hyperplane_region(planes, offset)
        regions.setdefault(region, []).append((_distance(strategy, peer.coord, q.coord), q.id))
    chosen: Set[PeerId] = set()
    for members in regions.values():
        chosen.update(pid for _, pid in sorted(members)[:k])
    return frozenset(chosen)


def brute_select(peer: Peer, candidates: Iterable[Peer], strategy: SelectionStrategy) -> FrozenSet[PeerId]:
    """Reference neighbour set for any strategy."""
    pool = [q for q in candidates if q.id != peer.id]
    if strategy.kind is StrategyKind.EMPTY_RECT:
        return brute_empty_rect(peer, pool)
    if strategy.kind is StrategyKind.K_CLOSEST:
        ranked = sorted(pool, key=lambda q: (_distance(strategy, peer.coord, q.coord), q.id))
        return frozenset(q.id for q in ranked[:strategy.k])
    if strategy.kind is StrategyKind.ORTHO_HP:
        for q in pool:
            orthant_of(peer.coord, q.coord)
        planes = HyperplaneSet.orthogonal(len(peer.coord))
    else:
        planes = strategy.planes
    return brute_hyperplanes(peer, pool, planes, strategy.k, strategy)


# ----------------------------------------------------------------------
# Checks against the optimised modules
# ----------------------------------------------------------------------

def check_knowledge_round(topology: Topology, cfg: GossipConfig, allow_large: bool = False) -> OracleReport:
    """One gossip round on a copy must deliver exactly the BR-hop neighbourhoods."""
    _enforce_cap(len(topology), allow_large)
    report = OracleReport("knowledge_round", len(topology), _dimension(topology.peers.values()))
    adjacency: Dict[PeerId, Set[PeerId]] = {pid: set() for pid in topology.peers}
    for pid, neighbours in topology.out_neighbors.items():
        for q in neighbours:
            adjacency[pid].add(q)
            adjacency[q].add(pid)

    heard = knowledge_round(topology.copy(), cfg, KnowledgeMode.GOSSIP)
    for pid in sorted(topology.peers):
        expected = bfs_hops(adjacency, pid, cfg.br)
        if heard[pid] != expected:
            report.add(pid, sorted(expected), sorted(heard[pid]), "heard")
    return report


def check_full_knowledge_equilibrium(
    topology: Topology,
    strategy: SelectionStrategy,
    allow_large: bool = False,
) -> OracleReport:
    """Recompute every neighbour set against all other peers."""
    _enforce_cap(len(topology), allow_large)
    peers = [topology.peers[pid] for pid in sorted(topology.peers)]
    report = OracleReport("full_knowledge_equilibrium", len(peers), _dimension(peers))
    for peer in peers:
        expected = brute_select(peer, peers, strategy)
        actual = frozenset(topology.out_neighbors.get(peer.id, ()))
        if expected != actual:
            report.add(peer.id, sorted(expected), sorted(actual), "neighbours")
    return report


def check_delivery(
    tree: MulticastTree,
    peers: Union[Mapping[PeerId, Peer], Iterable[Peer]],
    allow_large: bool = False,
) -> OracleReport:
    """Replay the message log and re-check every zone claim of tree."""
    lookup = peers if isinstance(peers, Mapping) else {p.id: p for p in peers}
    _enforce_cap(len(lookup), allow_large)
    report = OracleReport("delivery", len(lookup), _dimension(lookup.values()))
    everyone = frozenset(lookup)
    reached = tree.reached

    if reached | tree.unreached != everyone:
        report.add(None, len(everyone), len(reached | tree.unreached), "partition")
    for pid in sorted(reached & tree.unreached):
        report.add(pid, "reached xor unreached", "both", "partition")

    # replay: a sender must already hold the message
    delivered = {tree.root}
    first_from: Dict[PeerId, PeerId] = {}
    receipts = 0
    for sender, receiver in tree.messages:
        if sender not in delivered:
            report.add(sender, "sender holds message", "sent before receiving", "log")
            continue
        receipts += 1
        if receiver not in delivered:
            delivered.add(receiver)
            first_from[receiver] = sender
    duplicates = receipts - len(first_from)
    if duplicates != tree.duplicates:
        report.add(None, duplicates, tree.duplicates, "duplicates")
    if tree.messages_sent != len(reached) - 1 + tree.duplicates:
        report.add(None, len(reached) - 1 + tree.duplicates, tree.messages_sent, "message_count")
    for pid in sorted(reached - delivered):
        report.add(pid, "delivered", "orphaned", "log")

    root_zone = tree.zone_trace.get(tree.root)
    if root_zone is None or not root_zone.rect.is_all_space():
        report.add(tree.root, "all space", str(root_zone), "zone")
    for pid in sorted(tree.zone_trace):
        if pid == tree.root:
            continue
        zone = tree.zone_trace[pid]
        if not contains(zone.rect, lookup[pid].coord):
            report.add(pid, "inside own zone", str(zone), "zone")
        parent = tree.parent.get(pid)
        if parent is None:
            report.add(pid, "has parent", None, "zone")
            continue
        if not is_subset(zone.rect, tree.zone_trace[parent].rect):
            report.add(pid, f"within {tree.zone_trace[parent]}", str(zone), "zone")
        if contains(zone.rect, lookup[parent].coord):
            report.add(pid, "parent outside zone", parent, "zone")

    if not report.passed:
        logger.warning("delivery check failed", root=tree.root, mismatches=len(report.mismatches))
    return report
