"""Responsibility-zone multicast tree construction and tree statistics.

The root receives the whole space as its zone. A peer holding zone Z keeps the
out-neighbours lying inside Z, groups them by orthant around itself, picks the
lower-median (by L1 distance) neighbour of every non-empty orthant and hands
it Z intersected with that orthant. Child zones are open and pairwise
disjoint, so no peer is ever reached twice.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import structlog

from geocast.error_handling import DistinctnessError, UsageError
from geocast.geometry import (
    HyperRect, RegionId, all_orthants, contains, intersect, orthant_rect,
)
from geocast.overlay import CoordIndex, Peer, PeerId, Topology

logger = structlog.get_logger(__name__)

Forward = Tuple[PeerId, "Zone"]


@dataclass(frozen=True)
class Zone:
    """Open hyper-rectangle a peer is responsible for"""
    rect: HyperRect

    @classmethod
    def all_space(cls, d: int) -> Zone:
        return cls(HyperRect.all_space(d))

    def contains(self, coord: Sequence[float]) -> bool:
        return contains(self.rect, coord)

    def __str__(self) -> str:
        return str(self.rect)


@dataclass
class MulticastTree:
    """Outcome of one tree construction started at root"""
    root: PeerId
    n: int
    parent: Dict[PeerId, PeerId] = field(default_factory=dict)
    zone_trace: Dict[PeerId, Zone] = field(default_factory=dict)
    steps: Dict[PeerId, Tuple[Forward, ...]] = field(default_factory=dict)
    messages: List[Tuple[PeerId, PeerId]] = field(default_factory=list)
    duplicates: int = 0
    unreached: FrozenSet[PeerId] = frozenset()
    topology_converged: bool = True

    @property
    def messages_sent(self) -> int:
        return len(self.messages)

    @property
    def reached(self) -> FrozenSet[PeerId]:
        return frozenset(self.zone_trace)

    def children(self, pid: PeerId) -> Tuple[PeerId, ...]:
        return tuple(child for child, _ in self.steps.get(pid, ()))

    def max_children(self) -> int:
        return max((len(forwards) for forwards in self.steps.values()), default=0)


@dataclass(frozen=True)
class TreeMetrics:
    max_tree_degree: int
    max_children: int
    longest_root_leaf_hops: int
    diameter_hops: int


def median_index(m: int) -> int:
    """Lower median position in a sorted list of m > 0 items."""
    return (m + 1) // 2 - 1


@dataclass(frozen=True, eq=False)
class NeighborRows:
    """A peer's out-neighbours sorted by (orthant code, L1 distance, id).

    Orthant code c names the c-th region of all_orthants(d), so ascending
    codes visit the orthants in region order.
    """
    ids: np.ndarray
    coords: np.ndarray
    codes: np.ndarray


ForwardingTable = Dict[PeerId, NeighborRows]


@lru_cache(maxsize=None)
def _orthants(d: int) -> Tuple[RegionId, ...]:
    return tuple(all_orthants(d))


def neighbor_rows(topology: Topology, pid: PeerId) -> NeighborRows:
    origin = np.array(topology.peers[pid].coord, dtype=np.float64)
    d = len(origin)
    neighbours = topology.out_neighbors.get(pid, ())
    ids = np.array(neighbours, dtype=np.int64)
    coords = np.array([topology.peers[q].coord for q in neighbours], dtype=np.float64).reshape(len(ids), d)
    offsets = coords - origin
    zero = np.argwhere(offsets == 0.0)
    if len(zero):
        row, dim = (int(v) for v in zero[0])
        raise DistinctnessError(
            f"Coordinates coincide in dimension {dim}",
            {"peer": pid, "neighbour": int(ids[row]), "dimension": dim},
        )
    codes = (offsets > 0).astype(np.int64) @ (1 << np.arange(d - 1, -1, -1, dtype=np.int64))
    order = np.lexsort((ids, np.sum(np.abs(offsets), axis=1), codes))
    return NeighborRows(ids[order], coords[order], codes[order])


def forwarding_table(topology: Topology) -> ForwardingTable:
    """neighbor_rows for every peer; only the zone filter changes between roots."""
    return {pid: neighbor_rows(topology, pid) for pid in topology.ids()}


def forwarding_step(
    topology: Topology,
    pid: PeerId,
    zone: Zone,
    table: Optional[ForwardingTable] = None,
) -> Tuple[Forward, ...]:
    """The (child, child zone) pairs peer pid forwards to when holding zone."""
    rows = table[pid] if table is not None else neighbor_rows(topology, pid)
    inside = np.flatnonzero(_zone_mask(zone.rect, rows.coords))
    if not len(inside):
        return ()
    codes, starts, counts = np.unique(rows.codes[inside], return_index=True, return_counts=True)
    chosen = rows.ids[inside[starts + median_index(counts)]]

    origin = topology.peers[pid].coord
    regions = _orthants(len(origin))
    forwards: List[Forward] = []
    for code, child in zip(codes, chosen):
        child_rect = intersect(zone.rect, orthant_rect(origin, regions[int(code)]))
        # chosen lies in both operands, so the intersection is never empty
        forwards.append((int(child), Zone(child_rect)))
    return tuple(forwards)


def build_tree(topology: Topology, root: PeerId, table: Optional[ForwardingTable] = None) -> MulticastTree:
    """Simulate construction-message propagation from root over a frozen topology.

    Pass a forwarding_table when building trees from many roots of one topology.
    """
    if root not in topology.peers:
        raise UsageError(f"Unknown root peer {root}")
    d = len(topology.peers[root].coord)
    tree = MulticastTree(root=root, n=len(topology), topology_converged=topology.converged)
    if not topology.converged:
        logger.warning("building tree on unconverged topology", root=root)

    tree.zone_trace[root] = Zone.all_space(d)
    queue = deque([root])
    while queue:
        pid = queue.popleft()
        forwards = forwarding_step(topology, pid, tree.zone_trace[pid], table)
        tree.steps[pid] = forwards
        for child, zone in forwards:
            tree.messages.append((pid, child))
            if child in tree.zone_trace:
                tree.duplicates += 1
                continue
            tree.zone_trace[child] = zone
            tree.parent[child] = pid
            queue.append(child)

    tree.unreached = frozenset(topology.peers) - tree.reached
    return tree


# ----------------------------------------------------------------------
# Partition verification
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class StepReport:
    """Checks on one forwarding step"""
    peer_id: PeerId
    overlapping_zones: Tuple[Tuple[PeerId, PeerId], ...] = ()
    sender_inside: Tuple[PeerId, ...] = ()
    children_outside: Tuple[PeerId, ...] = ()
    multiply_covered: Tuple[PeerId, ...] = ()
    coverage_gaps: Tuple[PeerId, ...] = ()

    @property
    def passed(self) -> bool:
        return not (self.overlapping_zones or self.sender_inside or self.children_outside or self.multiply_covered)

    @property
    def complete(self) -> bool:
        return self.passed and not self.coverage_gaps


def _zone_mask(rect: HyperRect, coords: np.ndarray) -> np.ndarray:
    mask = np.ones(len(coords), dtype=bool)
    for dim, side in enumerate(rect.sides):
        column = coords[:, dim]
        mask &= (column > side.lo) if side.lo_open else (column >= side.lo)
        mask &= (column < side.hi) if side.hi_open else (column <= side.hi)
    return mask


def verify_step_partition(
    peer: Peer,
    zone: Zone,
    children: Sequence[Tuple[Peer, Zone]],
    all_peers: Union[Iterable[Peer], CoordIndex],
) -> StepReport:
    """Check disjointness, sender exclusion, self-containment and coverage of one step."""
    index = all_peers if isinstance(all_peers, CoordIndex) else CoordIndex({p.id: p for p in all_peers})

    overlapping = tuple(
        (a.id, b.id)
        for i, (a, za) in enumerate(children)
        for b, zb in children[i + 1:]
        if intersect(za.rect, zb.rect) is not None
    )
    sender_inside = tuple(child.id for child, z in children if z.contains(peer.coord))
    children_outside = tuple(child.id for child, z in children if not z.contains(child.coord))

    in_zone = _zone_mask(zone.rect, index.coords)
    in_zone &= index.ids != peer.id
    cover = np.zeros(len(index.ids), dtype=np.int64)
    for _, child_zone in children:
        cover += _zone_mask(child_zone.rect, index.coords)
    multiply = tuple(int(q) for q in index.ids[in_zone & (cover > 1)])
    gaps = tuple(int(q) for q in index.ids[in_zone & (cover == 0)])

    return StepReport(
        peer_id=peer.id,
        overlapping_zones=overlapping,
        sender_inside=sender_inside,
        children_outside=children_outside,
        multiply_covered=multiply,
        coverage_gaps=gaps,
    )


def verify_tree_partitions(tree: MulticastTree, topology: Topology) -> List[StepReport]:
    """verify_step_partition over every forwarding step of tree, in peer-id order."""
    index = CoordIndex(topology.peers)
    reports = []
    for pid in sorted(tree.steps):
        children = [(topology.peers[child], zone) for child, zone in tree.steps[pid]]
        reports.append(verify_step_partition(topology.peers[pid], tree.zone_trace[pid], children, index))
    return reports


# ----------------------------------------------------------------------
# Tree statistics, shared with the stability tree
# ----------------------------------------------------------------------

def tree_graph(nodes: Iterable[PeerId], parent: Mapping[PeerId, Optional[PeerId]]) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(sorted(nodes))
    graph.add_edges_from((child, up) for child, up in parent.items() if up is not None)
    return graph


def eccentricity_from(graph: nx.Graph, source: PeerId) -> Tuple[PeerId, int]:
    """Farthest node from source (smallest id on ties) and its hop distance."""
    lengths = nx.single_source_shortest_path_length(graph, source)
    far, hops = min(lengths.items(), key=lambda item: (-item[1], item[0]))
    return far, hops


def forest_diameter(graph: nx.Graph) -> int:
    """Largest hop diameter over the components of a forest (double sweep)."""
    diameter = 0
    for component in nx.connected_components(graph):
        start = min(component)
        far, _ = eccentricity_from(graph, start)
        _, hops = eccentricity_from(graph, far)
        diameter = max(diameter, hops)
    return diameter


def max_degree(graph: nx.Graph) -> int:
    return max((deg for _, deg in graph.degree()), default=0)


def tree_metrics(tree: MulticastTree) -> TreeMetrics:
    graph = tree_graph(tree.reached, tree.parent)
    _, longest = eccentricity_from(graph, tree.root)
    return TreeMetrics(
        max_tree_degree=max_degree(graph),
        max_children=tree.max_children(),
        longest_root_leaf_hops=longest,
        diameter_hops=forest_diameter(graph),
    )
