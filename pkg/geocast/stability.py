"""Lifetime-ordered stability trees.

Each peer's departure time T(P) becomes one of its coordinates. Every peer then
links to an overlay neighbour leaving strictly later than itself (its preferred
tree neighbour), so lifetimes decrease towards the leaves and the next peer to
leave is always a leaf.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import structlog

from geocast.config import KnowledgeMode, InsertionMode, PreferredRule, UpdateOrder
from geocast.error_handling import DistinctnessError, UsageError
from geocast.geometry import SpaceSpec, l1_distance
from geocast.multicast import forest_diameter, max_degree, tree_graph
from geocast.overlay import (
    GossipConfig, Peer, PeerId, SelectionStrategy, Topology, build_overlay, generate_peers,
)

logger = structlog.get_logger(__name__)

PeerLookup = Union[Mapping[PeerId, Peer], Iterable[Peer]]


@dataclass(frozen=True)
class StabilityConfig:
    time_coord_index: int = 1  # 1-based
    preferred_rule: PreferredRule = PreferredRule.MAX_LIFETIME

    def axis(self, d: int) -> int:
        if not 1 <= self.time_coord_index <= d:
            raise UsageError(f"time_coord_index {self.time_coord_index} outside [1, {d}]")
        return self.time_coord_index - 1


@dataclass(frozen=True)
class ComponentStats:
    root: PeerId
    size: int


@dataclass
class StabilityTree:
    """Preferred-neighbour links; child -> parent"""
    preferred: Dict[PeerId, Optional[PeerId]]
    root_candidates: Tuple[PeerId, ...]
    is_single_tree: bool
    components: Tuple[ComponentStats, ...] = ()

    def children_map(self) -> Dict[PeerId, List[PeerId]]:
        children: Dict[PeerId, List[PeerId]] = {pid: [] for pid in self.preferred}
        for child, parent in sorted(self.preferred.items()):
            if parent is not None:
                children.setdefault(parent, []).append(child)
        return children


@dataclass(frozen=True)
class MonotoneReport:
    passed: bool
    violations: Tuple[Tuple[PeerId, PeerId], ...]
    max_degree: int
    diameter_hops: int
    root: Optional[PeerId]


@dataclass(frozen=True)
class DepartureReport:
    order: Tuple[PeerId, ...]
    non_leaf_departures: Tuple[Tuple[PeerId, int], ...] = ()
    single_tree: bool = True

    @property
    def disconnections(self) -> int:
        return len(self.non_leaf_departures)

    @property
    def passed(self) -> bool:
        return not self.non_leaf_departures


def _as_lookup(peers: PeerLookup) -> Mapping[PeerId, Peer]:
    if isinstance(peers, Mapping):
        return peers
    return {peer.id: peer for peer in peers}


def embed_lifetimes(peers: Sequence[Peer], cfg: StabilityConfig, spec: SpaceSpec) -> List[Peer]:
    """Replace coordinate I of every peer by its lifetime mapped affinely onto [0, VMAX]."""
    axis = cfg.axis(spec.d)
    if not peers:
        return []
    missing = [p.id for p in peers if p.lifetime is None]
    if missing:
        raise UsageError(f"Peers without lifetime: {missing[:10]}", {"missing": len(missing)})
    lifetimes = [p.lifetime for p in peers]
    if len(set(lifetimes)) != len(lifetimes):
        raise DistinctnessError("Peer lifetimes must be pairwise distinct")

    low, high = min(lifetimes), max(lifetimes)
    span = high - low

    def scaled(t: float) -> float:
        return spec.vmax / 2 if span == 0 else (t - low) / span * spec.vmax

    embedded = [
        replace(p, coord=spec.validate(p.coord[:axis] + (scaled(p.lifetime),) + p.coord[axis + 1:]))
        for p in peers
    ]
    if len({p.coord[axis] for p in embedded}) != len(embedded):
        raise DistinctnessError("Lifetimes too close to stay distinct after scaling", {"axis": axis})
    return embedded


def preferred_neighbor(
    peer: Peer,
    neighbours: Iterable[Peer],
    rule: PreferredRule = PreferredRule.MAX_LIFETIME,
) -> Optional[Peer]:
    """A neighbour leaving strictly later than peer, chosen by rule; None if there is none."""
    later = [q for q in neighbours if q.lifetime is not None and q.lifetime > peer.lifetime]
    if not later:
        return None
    if rule is PreferredRule.MIN_LIFETIME_ABOVE:
        return min(later, key=lambda q: (q.lifetime, q.id))
    if rule is PreferredRule.NEAREST:
        return min(later, key=lambda q: (l1_distance(peer.coord, q.coord), q.id))
    return max(later, key=lambda q: (q.lifetime, -q.id))


def build_stability_tree(topology: Topology, cfg: StabilityConfig = StabilityConfig()) -> StabilityTree:
    missing = [pid for pid, p in topology.peers.items() if p.lifetime is None]
    if missing:
        raise UsageError(f"Stability tree needs lifetimes; missing for {sorted(missing)[:10]}")

    preferred: Dict[PeerId, Optional[PeerId]] = {}
    for pid in topology.ids():
        neighbours = [topology.peers[q] for q in topology.out_neighbors[pid]]
        choice = preferred_neighbor(topology.peers[pid], neighbours, cfg.preferred_rule)
        preferred[pid] = choice.id if choice is not None else None

    roots = tuple(pid for pid, parent in preferred.items() if parent is None)
    # parents strictly outlive children, so following links always ends at a root
    top: Dict[PeerId, PeerId] = {}
    for pid in preferred:
        path = []
        cursor = pid
        while cursor not in top and preferred[cursor] is not None:
            path.append(cursor)
            cursor = preferred[cursor]
        root = top.get(cursor, cursor)
        for visited in path + [cursor]:
            top[visited] = root

    sizes: Dict[PeerId, int] = {root: 0 for root in roots}
    for root in top.values():
        sizes[root] += 1
    components = tuple(ComponentStats(root, sizes[root]) for root in sorted(sizes, key=lambda r: (-sizes[r], r)))

    tree = StabilityTree(
        preferred=preferred,
        root_candidates=roots,
        is_single_tree=len(roots) == 1,
        components=components,
    )
    if not tree.is_single_tree:
        logger.info("preferred links form a forest", components=len(roots), n=len(preferred))
    return tree


def verify_monotone(tree: StabilityTree, peers: PeerLookup) -> MonotoneReport:
    """Every parent must leave strictly later than each of its children."""
    lookup = _as_lookup(peers)
    violations = tuple(
        (parent, child)
        for child, parent in sorted(tree.preferred.items())
        if parent is not None and not lookup[parent].lifetime > lookup[child].lifetime
    )
    graph = tree_graph(tree.preferred, tree.preferred)
    root = max(tree.root_candidates, key=lambda pid: lookup[pid].lifetime) if tree.root_candidates else None
    return MonotoneReport(
        passed=not violations,
        violations=violations,
        max_degree=max_degree(graph),
        diameter_hops=forest_diameter(graph) if not graph or nx.is_forest(graph) else -1,
        root=root,
    )


def simulate_departures(tree: StabilityTree, peers: PeerLookup) -> DepartureReport:
    """Remove peers by increasing lifetime; each must have no children left."""
    lookup = _as_lookup(peers)
    remaining = {pid: len(children) for pid, children in tree.children_map().items()}
    order = tuple(sorted(tree.preferred, key=lambda pid: (lookup[pid].lifetime, pid)))
    gone = set()
    non_leaf: List[Tuple[PeerId, int]] = []
    for pid in order:
        if remaining.get(pid, 0) > 0:
            non_leaf.append((pid, remaining[pid]))
        gone.add(pid)
        parent = tree.preferred[pid]
        if parent is not None and parent not in gone:
            remaining[parent] -= 1
    if non_leaf:
        logger.warning("departures disconnected the tree", events=len(non_leaf))
    return DepartureReport(order=order, non_leaf_departures=tuple(non_leaf), single_tree=tree.is_single_tree)


def build_lifetime_overlay(
    n: int,
    spec: SpaceSpec,
    seed: int,
    k: int,
    cfg: StabilityConfig = StabilityConfig(),
    gossip: GossipConfig = GossipConfig(),
    mode: KnowledgeMode = KnowledgeMode.FULL,
    insertion: InsertionMode = InsertionMode.BATCH,
    max_rounds: Optional[int] = None,
    update_order: UpdateOrder = UpdateOrder.SYNCHRONOUS,
    strategy: Optional[SelectionStrategy] = None,
) -> Tuple[Topology, int]:
    """Peers with embedded lifetimes joined into an Orthogonal Hyperplanes(K) overlay."""
    peers = embed_lifetimes(generate_peers(n, spec, seed, with_lifetimes=True), cfg, spec)
    strategy = strategy or SelectionStrategy.orthogonal(k)
    return build_overlay(
        peers, strategy, gossip, mode=mode, insertion=insertion, seed=seed,
        max_rounds=max_rounds, update_order=update_order,
    )
