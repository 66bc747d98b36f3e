"""Peer population, gossip knowledge sets and neighbour selection.

A Topology holds every peer's selected out-neighbours and its knowledge set
I(P). Rounds are synchronous by default: first every peer learns about the
peers within BR undirected hops of the current neighbour graph, then every
peer whose knowledge changed reselects its neighbours from it.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import (
    AbstractSet, Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple,
)

import networkx as nx
import numpy as np
import structlog

from geocast.config import (
    DistanceKind, HyperplaneFamily, InsertionMode, KnowledgeMode, RunConfig, StrategyKind, UpdateOrder,
)
from geocast.error_handling import DistinctnessError, GenerationError, NonConvergenceError, UsageError
from geocast.geometry import Coord, HyperplaneSet, SpaceSpec

logger = structlog.get_logger(__name__)

PeerId = int
NeighborMap = Dict[PeerId, Tuple[PeerId, ...]]

LIFETIME_HORIZON: float = 100_000.0  # simulated seconds
MAX_GENERATION_ATTEMPTS: int = 1000


@dataclass(frozen=True)
class Peer:
    """A participant: identifier coordinates, opaque address, optional departure time"""
    id: PeerId
    coord: Coord
    addr: str
    lifetime: Optional[float] = None


@dataclass(frozen=True)
class GossipConfig:
    """Existence-announcement radius and freshness window, both in rounds/hops"""
    br: int = 2
    freshness_rounds: int = 2

    def __post_init__(self) -> None:
        if self.br < 2:
            raise UsageError(f"BR must be >= 2, got {self.br}")
        if self.freshness_rounds < 1:
            raise UsageError(f"freshness_rounds must be >= 1, got {self.freshness_rounds}")

    @classmethod
    def from_config(cls, config: RunConfig) -> GossipConfig:
        return cls(br=config.br, freshness_rounds=config.freshness_rounds)


@dataclass(frozen=True)
class SelectionStrategy:
    """Neighbour-selection rule applied to a peer's knowledge set"""
    kind: StrategyKind = StrategyKind.EMPTY_RECT
    k: int = 1
    planes: Optional[HyperplaneSet] = None
    distance: DistanceKind = DistanceKind.L1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise UsageError(f"K must be >= 1, got {self.k}")
        if self.kind is StrategyKind.GEN_HP and self.planes is None:
            raise UsageError("General hyperplanes strategy needs a HyperplaneSet")

    @classmethod
    def empty_rect(cls) -> SelectionStrategy:
        return cls(StrategyKind.EMPTY_RECT)

    @classmethod
    def orthogonal(cls, k: int, distance: DistanceKind = DistanceKind.L1) -> SelectionStrategy:
        return cls(StrategyKind.ORTHO_HP, k=k, distance=distance)

    @classmethod
    def general(cls, planes: HyperplaneSet, k: int, distance: DistanceKind = DistanceKind.L1) -> SelectionStrategy:
        return cls(StrategyKind.GEN_HP, k=k, planes=planes, distance=distance)

    @classmethod
    def k_closest(cls, k: int, distance: DistanceKind = DistanceKind.L1) -> SelectionStrategy:
        return cls(StrategyKind.K_CLOSEST, k=k, distance=distance)

    @classmethod
    def for_space(
        cls,
        kind: StrategyKind,
        d: int,
        k: int = 1,
        distance: DistanceKind = DistanceKind.L1,
        family: HyperplaneFamily = HyperplaneFamily.SIGNED,
    ) -> SelectionStrategy:
        if kind is StrategyKind.GEN_HP:
            planes = HyperplaneSet.orthogonal(d) if family is HyperplaneFamily.ORTHOGONAL else HyperplaneSet.signed(d)
            return cls.general(planes, k, distance)
        return cls(kind, k=k, distance=distance)

    @classmethod
    def from_config(cls, config: RunConfig) -> SelectionStrategy:
        return cls.for_space(config.strategy, config.d, config.k, config.distance, config.hyperplanes)

    def planes_for(self, d: int) -> Optional[HyperplaneSet]:
        if self.kind is StrategyKind.ORTHO_HP:
            return HyperplaneSet.orthogonal(d)
        if self.kind is StrategyKind.GEN_HP:
            if self.planes is not None and self.planes.d != d:
                raise UsageError(f"Hyperplanes are {self.planes.d}-dimensional, space is {d}-dimensional")
            return self.planes
        return None

    def region_bound(self, d: int) -> Optional[int]:
        """Upper bound on |selected|, when the strategy has one."""
        if self.kind is StrategyKind.ORTHO_HP:
            return self.k * 2 ** d
        if self.kind is StrategyKind.GEN_HP and self.planes is not None:
            return self.k * 2 ** self.planes.h
        if self.kind is StrategyKind.K_CLOSEST:
            return self.k
        return None


class FullKnowledge(AbstractSet[PeerId]):
    """I(P) under full knowledge: every member except the owner.

    All peers share one members frozenset, so the view costs O(1) per peer.
    """

    __slots__ = ("owner", "members")

    def __init__(self, owner: PeerId, members: FrozenSet[PeerId]) -> None:
        self.owner = owner
        self.members = members

    def __contains__(self, q: object) -> bool:
        return q != self.owner and q in self.members

    def __len__(self) -> int:
        return len(self.members) - (self.owner in self.members)

    def __iter__(self) -> Iterator[PeerId]:
        return (q for q in sorted(self.members) if q != self.owner)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FullKnowledge):
            return self.owner == other.owner and (self.members is other.members or self.members == other.members)
        return super().__eq__(other)

    @classmethod
    def _from_iterable(cls, it: Iterable[PeerId]) -> FrozenSet[PeerId]:
        return frozenset(it)

    def __repr__(self) -> str:
        return f"FullKnowledge(owner={self.owner}, size={len(self)})"


Knowledge = AbstractSet[PeerId]


@dataclass
class Topology:
    """Directed selection graph plus per-peer knowledge sets"""
    peers: Dict[PeerId, Peer] = field(default_factory=dict)
    out_neighbors: NeighborMap = field(default_factory=dict)
    knowledge: Dict[PeerId, Knowledge] = field(default_factory=dict)
    last_heard: Dict[PeerId, Dict[PeerId, int]] = field(default_factory=dict)
    round: int = 0
    converged: bool = False
    # knowledge each peer last selected from, keyed by strategy
    _selected_from: Dict[PeerId, Knowledge] = field(default_factory=dict, repr=False)
    # members shared by every FullKnowledge view of the current population
    _everyone: Optional[FrozenSet[PeerId]] = field(default=None, repr=False)
    _selected_with: Optional[SelectionStrategy] = field(default=None, repr=False)

    @classmethod
    def from_peers(cls, peers: Iterable[Peer]) -> Topology:
        topology = cls()
        for peer in peers:
            if peer.id in topology.peers:
                raise UsageError(f"Duplicate peer id {peer.id}")
            topology.peers[peer.id] = peer
            topology.out_neighbors[peer.id] = ()
            topology.knowledge[peer.id] = frozenset()
            topology.last_heard[peer.id] = {}
        return topology

    def ids(self) -> List[PeerId]:
        return sorted(self.peers)

    def __len__(self) -> int:
        return len(self.peers)

    def snapshot(self) -> NeighborMap:
        return {pid: self.out_neighbors[pid] for pid in self.ids()}

    def undirected_adjacency(self) -> Dict[PeerId, Set[PeerId]]:
        adjacency: Dict[PeerId, Set[PeerId]] = {pid: set() for pid in self.peers}
        for pid, neighbours in self.out_neighbors.items():
            for q in neighbours:
                adjacency[pid].add(q)
                adjacency[q].add(pid)
        return adjacency

    def graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.ids())
        graph.add_edges_from((pid, q) for pid, neighbours in self.out_neighbors.items() for q in neighbours)
        return graph

    def everyone(self) -> FrozenSet[PeerId]:
        """The current population as one shared frozenset, rebuilt only when it changes."""
        members = self._everyone
        if members is None or len(members) != len(self.peers) or not members.issuperset(self.peers):
            members = frozenset(self.peers)
            self._everyone = members
        return members

    def copy(self) -> Topology:
        return Topology(
            peers=dict(self.peers),
            out_neighbors=dict(self.out_neighbors),
            knowledge=dict(self.knowledge),
            last_heard={pid: dict(seen) for pid, seen in self.last_heard.items()},
            round=self.round,
            converged=self.converged,
            _selected_from=dict(self._selected_from),
            _selected_with=self._selected_with,
            _everyone=self._everyone,
        )

    def check_well_formed(self) -> None:
        for pid, neighbours in self.out_neighbors.items():
            if pid in neighbours:
                raise UsageError(f"Peer {pid} lists itself as a neighbour")
            unknown = [q for q in neighbours if q not in self.peers]
            if unknown:
                raise UsageError(f"Peer {pid} references unknown peers {unknown}")
            outside = [q for q in neighbours if q not in self.knowledge.get(pid, frozenset())]
            if outside:
                raise UsageError(f"Peer {pid} has neighbours outside its knowledge set: {outside}")


class CoordIndex:
    """Dense numpy view of peer coordinates, rows in ascending id order."""

    def __init__(self, peers: Mapping[PeerId, Peer]) -> None:
        self.ids = np.array(sorted(peers), dtype=np.int64)
        self.position = {int(pid): row for row, pid in enumerate(self.ids)}
        d = len(next(iter(peers.values())).coord) if peers else 0
        self.coords = np.array([peers[int(pid)].coord for pid in self.ids], dtype=np.float64).reshape(len(self.ids), d)

    def rows(self, ids: Iterable[PeerId]) -> np.ndarray:
        if isinstance(ids, FullKnowledge) and len(ids.members) == len(self.ids) and ids.owner in self.position:
            keep = np.ones(len(self.ids), dtype=bool)
            keep[self.position[ids.owner]] = False
            return np.flatnonzero(keep)
        return np.array(sorted(self.position[q] for q in ids), dtype=np.int64)


def generate_peers(
    n: int,
    spec: SpaceSpec,
    seed: int,
    with_lifetimes: bool = False,
    lifetime_horizon: float = LIFETIME_HORIZON,
) -> List[Peer]:
    """n peers with uniform coordinates, distinct per dimension, deterministic in seed."""
    if n < 1:
        raise UsageError(f"Peer count must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0.0, spec.vmax, size=(n, spec.d))
    for dim in range(spec.d):
        coords[:, dim] = _redraw_collisions(coords[:, dim], rng, 0.0, spec.vmax)

    lifetimes: Optional[np.ndarray] = None
    if with_lifetimes:
        lifetimes = _redraw_collisions(rng.uniform(0.0, lifetime_horizon, size=n), rng, 0.0, lifetime_horizon)

    peers = [
        Peer(
            id=i,
            coord=tuple(float(v) for v in coords[i]),
            addr=f"sim://peer-{i}:7000",
            lifetime=float(lifetimes[i]) if lifetimes is not None else None,
        )
        for i in range(n)
    ]
    logger.debug("generated peers", n=n, d=spec.d, seed=seed, lifetimes=with_lifetimes)
    return peers


def _redraw_collisions(values: np.ndarray, rng: np.random.Generator, lo: float, hi: float) -> np.ndarray:
    values = values.copy()
    for _ in range(MAX_GENERATION_ATTEMPTS):
        _, first, counts = np.unique(values, return_index=True, return_counts=True)
        if np.all(counts == 1):
            return values
        keep = np.zeros(len(values), dtype=bool)
        keep[first] = True
        redraw = ~keep
        values[redraw] = rng.uniform(lo, hi, size=int(redraw.sum()))
    raise GenerationError(
        "Could not draw pairwise-distinct values",
        {"attempts": MAX_GENERATION_ATTEMPTS, "count": len(values)},
    )


# ----------------------------------------------------------------------
# Neighbour selection
# ----------------------------------------------------------------------

def _pareto_minimal(points: np.ndarray) -> np.ndarray:
    """Mask of rows not dominated (componentwise <=) by another row."""
    m, d = points.shape
    mask = np.zeros(m, dtype=bool)
    if m == 0:
        return mask
    if d == 1:
        mask[int(np.argmin(points[:, 0]))] = True
        return mask
    if d == 2:
        order = np.argsort(points[:, 0], kind="stable")
        ys = points[order, 1]
        best_before = np.minimum.accumulate(np.concatenate(([np.inf], ys[:-1])))
        mask[order[ys < best_before]] = True
        return mask

    # a dominating row always has a strictly smaller sum
    order = np.argsort(points.sum(axis=1), kind="stable")
    frontier = np.empty_like(points)
    size = 0
    for row in order:
        p = points[row]
        if size and np.any(np.all(frontier[:size] <= p, axis=1)):
            continue
        frontier[size] = p
        size += 1
        mask[row] = True
    return mask


def _region_labels(signs: np.ndarray) -> np.ndarray:
    _, inverse = np.unique(signs, axis=0, return_inverse=True)
    return np.asarray(inverse).reshape(-1)


def _distances(offsets: np.ndarray, distance: DistanceKind) -> np.ndarray:
    if distance is DistanceKind.L2:
        return np.sqrt(np.sum(offsets * offsets, axis=1))
    return np.sum(np.abs(offsets), axis=1)


def _check_distinct(offsets: np.ndarray, cand_ids: np.ndarray) -> None:
    zero = np.argwhere(offsets == 0.0)
    if len(zero):
        row, dim = (int(v) for v in zero[0])
        raise DistinctnessError(
            f"Peer {int(cand_ids[row])} shares coordinate {dim} with the selecting peer",
            {"peer": int(cand_ids[row]), "dimension": dim},
        )


def select_from_arrays(
    origin: np.ndarray,
    cand_coords: np.ndarray,
    cand_ids: np.ndarray,
    strategy: SelectionStrategy,
) -> Tuple[PeerId, ...]:
    """Vectorised selection; returns the chosen ids in ascending order."""
    if len(cand_ids) == 0:
        return ()
    offsets = cand_coords - origin
    d = offsets.shape[1]

    if strategy.kind is StrategyKind.EMPTY_RECT:
        _check_distinct(offsets, cand_ids)
        labels = _region_labels(offsets > 0)
        magnitudes = np.abs(offsets)
        chosen: List[int] = []
        for label in np.unique(labels):
            rows = np.flatnonzero(labels == label)
            chosen.extend(int(q) for q in cand_ids[rows[_pareto_minimal(magnitudes[rows])]])
        return tuple(sorted(chosen))

    dist = _distances(offsets, strategy.distance)
    if strategy.kind is StrategyKind.K_CLOSEST:
        order = np.lexsort((cand_ids, dist))
        return tuple(sorted(int(q) for q in cand_ids[order[:strategy.k]]))

    planes = strategy.planes_for(d)
    if strategy.kind is StrategyKind.ORTHO_HP:
        _check_distinct(offsets, cand_ids)
    plane_matrix = np.array(planes.planes, dtype=np.float64)
    labels = _region_labels(offsets @ plane_matrix.T >= 0)
    order = np.lexsort((cand_ids, dist, labels))
    grouped = labels[order]
    starts = np.concatenate(([True], grouped[1:] != grouped[:-1]))
    positions = np.arange(len(order))
    rank = positions - np.maximum.accumulate(np.where(starts, positions, 0))
    return tuple(sorted(int(q) for q in cand_ids[order[rank < strategy.k]]))


def select_neighbors(peer: Peer, candidates: Iterable[Peer], strategy: SelectionStrategy) -> Tuple[PeerId, ...]:
    """Neighbours chosen by peer from candidates under strategy, ascending ids."""
    pool = sorted(candidates, key=lambda q: q.id)
    if any(q.id == peer.id for q in pool):
        raise UsageError(f"Peer {peer.id} appears among its own candidates")
    if not pool:
        return ()
    coords = np.array([q.coord for q in pool], dtype=np.float64)
    if coords.shape[1] != len(peer.coord):
        raise UsageError(f"Dimension mismatch: {coords.shape[1]} vs {len(peer.coord)}")
    ids = np.array([q.id for q in pool], dtype=np.int64)
    return select_from_arrays(np.array(peer.coord, dtype=np.float64), coords, ids, strategy)


# ----------------------------------------------------------------------
# Gossip rounds and convergence
# ----------------------------------------------------------------------

def knowledge_round(
    topology: Topology,
    cfg: GossipConfig,
    mode: KnowledgeMode = KnowledgeMode.GOSSIP,
) -> Dict[PeerId, Knowledge]:
    """Deliver one round of existence announcements and refresh every I(P).

    Returns the announcements heard this round; I(P) additionally keeps
    entries heard within the last freshness_rounds rounds. Full knowledge
    keeps no freshness bookkeeping.
    """
    topology.round += 1
    ids = topology.ids()
    if mode is KnowledgeMode.FULL:
        everyone = topology.everyone()
        heard: Dict[PeerId, Knowledge] = {}
        for pid in ids:
            heard[pid] = _full_view(topology, pid, everyone)
            topology.knowledge[pid] = heard[pid]
            topology.last_heard[pid] = {}
        return heard

    graph = topology.graph()
    heard = {
        pid: frozenset(q for q in nx.single_source_shortest_path_length(graph, pid, cutoff=cfg.br) if q != pid)
        for pid in ids
    }
    expiry = topology.round - cfg.freshness_rounds
    for pid in ids:
        _refresh(topology, pid, heard[pid], expiry)
    return heard


def _full_view(topology: Topology, pid: PeerId, everyone: FrozenSet[PeerId]) -> FullKnowledge:
    known = topology.knowledge.get(pid)
    if isinstance(known, FullKnowledge) and known.members is everyone:
        return known
    return FullKnowledge(pid, everyone)


def _refresh(topology: Topology, pid: PeerId, heard: Iterable[PeerId], expiry: int) -> None:
    seen = topology.last_heard.setdefault(pid, {})
    for q in heard:
        seen[q] = topology.round
    for q in [q for q, when in seen.items() if when <= expiry or q not in topology.peers]:
        del seen[q]
    topology.knowledge[pid] = frozenset(seen)


def _reselect(
    topology: Topology,
    index: CoordIndex,
    strategy: SelectionStrategy,
    pids: Sequence[PeerId],
    executor: Optional[Executor] = None,
) -> List[Tuple[PeerId, Tuple[PeerId, ...]]]:
    def select(pid: PeerId) -> Tuple[PeerId, Tuple[PeerId, ...]]:
        rows = index.rows(topology.knowledge[pid])
        origin = index.coords[index.position[pid]]
        return pid, select_from_arrays(origin, index.coords[rows], index.ids[rows], strategy)

    if executor is None:
        return [select(pid) for pid in pids]
    return list(executor.map(select, pids))


@dataclass
class ConvergenceResult:
    topology: Topology
    rounds: int


def converge(
    topology: Topology,
    cfg: GossipConfig,
    strategy: SelectionStrategy,
    max_rounds: int,
    mode: KnowledgeMode = KnowledgeMode.GOSSIP,
    update_order: UpdateOrder = UpdateOrder.SYNCHRONOUS,
    executor: Optional[Executor] = None,
) -> ConvergenceResult:
    """Run rounds until one changes no neighbour set and leaves no stale knowledge."""
    if max_rounds < 1:
        raise UsageError(f"max_rounds must be >= 1, got {max_rounds}")
    if topology._selected_with != strategy:
        topology._selected_from.clear()
        topology._selected_with = strategy

    index = CoordIndex(topology.peers)
    topology.converged = False
    previous = topology.snapshot()
    for rounds in range(1, max_rounds + 1):
        previous = topology.snapshot()
        if update_order is UpdateOrder.SEQUENTIAL:
            heard = _sequential_round(topology, index, cfg, strategy, mode)
        else:
            heard = knowledge_round(topology, cfg, mode)
            dirty = [pid for pid in topology.ids() if topology._selected_from.get(pid) != topology.knowledge[pid]]
            for pid, neighbours in _reselect(topology, index, strategy, dirty, executor):
                topology.out_neighbors[pid] = neighbours
                topology._selected_from[pid] = topology.knowledge[pid]

        stable = topology.snapshot() == previous and all(
            topology.knowledge[pid] == heard[pid] for pid in topology.peers
        )
        if stable:
            topology.converged = True
            logger.debug("overlay converged", rounds=rounds, n=len(topology), strategy=strategy.kind.value)
            return ConvergenceResult(topology, rounds)

    logger.warning("overlay did not converge", max_rounds=max_rounds, n=len(topology))
    raise NonConvergenceError(max_rounds, previous, topology.snapshot())


def _sequential_round(
    topology: Topology,
    index: CoordIndex,
    cfg: GossipConfig,
    strategy: SelectionStrategy,
    mode: KnowledgeMode,
) -> Dict[PeerId, Knowledge]:
    """Gauss-Seidel variant: each peer gossips and reselects on the latest graph."""
    topology.round += 1
    ids = topology.ids()
    graph = topology.graph()
    everyone = topology.everyone()
    expiry = topology.round - cfg.freshness_rounds
    heard: Dict[PeerId, Knowledge] = {}
    for pid in ids:
        if mode is KnowledgeMode.FULL:
            heard[pid] = _full_view(topology, pid, everyone)
            topology.knowledge[pid] = heard[pid]
            topology.last_heard[pid] = {}
        else:
            reach = nx.single_source_shortest_path_length(graph, pid, cutoff=cfg.br)
            heard[pid] = frozenset(q for q in reach if q != pid)
            _refresh(topology, pid, heard[pid], expiry)

        old = topology.out_neighbors[pid]
        _, new = _reselect(topology, index, strategy, [pid])[0]
        topology.out_neighbors[pid] = new
        topology._selected_from[pid] = topology.knowledge[pid]
        for q in set(old) - set(new):
            if pid not in topology.out_neighbors[q]:
                graph.remove_edge(pid, q)
        graph.add_edges_from((pid, q) for q in new)
    return heard


def insert_peer(topology: Topology, peer: Peer, bootstrap: Iterable[PeerId]) -> Topology:
    """Add peer with the bootstrap peers as its initial neighbours; caller converges."""
    bootstrap = tuple(sorted(set(bootstrap)))
    if peer.id in topology.peers:
        raise UsageError(f"Duplicate peer id {peer.id}")
    if not bootstrap and topology.peers:
        raise UsageError("Only the first peer may join without bootstrap peers")
    unknown = [q for q in bootstrap if q not in topology.peers]
    if unknown:
        raise UsageError(f"Unknown bootstrap peers {unknown}", {"unknown": unknown})
    for other in topology.peers.values():
        clash = [i for i, (a, b) in enumerate(zip(peer.coord, other.coord)) if a == b]
        if clash:
            raise DistinctnessError(
                f"Peer {peer.id} shares coordinate {clash[0]} with peer {other.id}",
                {"peer": peer.id, "other": other.id, "dimension": clash[0]},
            )

    topology.peers[peer.id] = peer
    topology.out_neighbors[peer.id] = bootstrap
    topology.knowledge[peer.id] = frozenset(bootstrap)
    topology.last_heard[peer.id] = {q: topology.round for q in bootstrap}
    topology.converged = False
    return topology


def remove_peer(topology: Topology, peer_id: PeerId) -> Topology:
    """Remove a departing peer from the overlay; caller converges."""
    if peer_id not in topology.peers:
        raise UsageError(f"Unknown peer {peer_id}")
    del topology.peers[peer_id]
    del topology.out_neighbors[peer_id]
    del topology.knowledge[peer_id]
    topology.last_heard.pop(peer_id, None)
    topology._selected_from.pop(peer_id, None)
    shrunk: Dict[FrozenSet[PeerId], FrozenSet[PeerId]] = {}
    for pid in topology.peers:
        if peer_id in topology.out_neighbors[pid]:
            topology.out_neighbors[pid] = tuple(q for q in topology.out_neighbors[pid] if q != peer_id)
        known = topology.knowledge[pid]
        if isinstance(known, FullKnowledge):
            if peer_id in known.members:
                if known.members not in shrunk:
                    shrunk[known.members] = known.members - {peer_id}
                topology.knowledge[pid] = FullKnowledge(pid, shrunk[known.members])
        elif peer_id in known:
            topology.knowledge[pid] = known - {peer_id}
        topology.last_heard[pid].pop(peer_id, None)
    if topology._everyone is not None:
        topology._everyone = shrunk.get(topology._everyone)
    topology.converged = False
    return topology


def build_overlay(
    peers: Sequence[Peer],
    strategy: SelectionStrategy,
    gossip: GossipConfig,
    mode: KnowledgeMode = KnowledgeMode.FULL,
    insertion: InsertionMode = InsertionMode.BATCH,
    seed: int = 0,
    max_rounds: Optional[int] = None,
    update_order: UpdateOrder = UpdateOrder.SYNCHRONOUS,
    executor: Optional[Executor] = None,
) -> Tuple[Topology, int]:
    """Converged overlay over peers; returns the topology and total rounds used.

    Incremental insertion adds peers one at a time, each bootstrapped to one
    uniformly chosen earlier peer, converging after every insertion.
    """
    if not peers:
        raise UsageError("Cannot build an overlay without peers")
    rng = np.random.default_rng(seed)
    limit = max_rounds if max_rounds is not None else 10 * len(peers)

    if insertion is InsertionMode.BATCH:
        topology = Topology.from_peers(peers)
        if mode is KnowledgeMode.GOSSIP:
            # random spanning bootstrap so announcements can reach everyone
            for position, peer in enumerate(peers[1:], start=1):
                contact = peers[int(rng.integers(0, position))].id
                topology.out_neighbors[peer.id] = (contact,)
                topology.knowledge[peer.id] = frozenset({contact})
                topology.last_heard[peer.id] = {contact: 0}
        result = converge(topology, gossip, strategy, limit, mode, update_order, executor)
        return result.topology, result.rounds

    topology = Topology()
    total = 0
    for position, peer in enumerate(peers):
        bootstrap = [] if position == 0 else [peers[int(rng.integers(0, position))].id]
        insert_peer(topology, peer, bootstrap)
        total += converge(topology, gossip, strategy, limit, mode, update_order, executor).rounds
    logger.info("incremental overlay built", n=len(peers), rounds=total, mode=mode.value)
    return topology, total


@dataclass(frozen=True)
class TopologyMetrics:
    max_degree: int
    avg_degree: float


def topology_metrics(topology: Topology) -> TopologyMetrics:
    """Max and mean undirected degree (union of in- and out-edges)."""
    adjacency = topology.undirected_adjacency()
    if not adjacency:
        return TopologyMetrics(0, 0.0)
    degrees = [len(adjacency[pid]) for pid in sorted(adjacency)]
    return TopologyMetrics(max(degrees), math.fsum(degrees) / len(degrees))


def neighbor_jaccard(a: Mapping[PeerId, Sequence[PeerId]], b: Mapping[PeerId, Sequence[PeerId]]) -> float:
    """Mean per-peer Jaccard similarity of two neighbour maps over their common peers."""
    common = sorted(set(a) & set(b))
    if not common:
        return 1.0
    scores = []
    for pid in common:
        left, right = set(a[pid]), set(b[pid])
        union = left | right
        scores.append(1.0 if not union else len(left & right) / len(union))
    return math.fsum(scores) / len(scores)

