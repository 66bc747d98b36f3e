"""Tests for responsibility-zone multicast trees."""

import pytest

from geocast.config import KnowledgeMode
from geocast.error_handling import DistinctnessError, UsageError
from geocast.geometry import (
    INF, HyperRect, Interval, SpaceSpec, intersect, is_subset, l1_distance, orthant_of, orthant_rect,
)
from geocast.multicast import (
    MulticastTree,
    Zone,
    build_tree,
    forwarding_step,
    forwarding_table,
    median_index,
    tree_metrics,
    verify_step_partition,
    verify_tree_partitions,
)
from geocast.overlay import GossipConfig, Peer, SelectionStrategy, Topology, build_overlay, generate_peers


def _peer(pid, *coord):
    return Peer(pid, tuple(float(c) for c in coord), f"sim://peer-{pid}:7000")


def _overlay(n, d, seed, mode=KnowledgeMode.FULL):
    peers = generate_peers(n, SpaceSpec(d), seed=seed)
    topology, _ = build_overlay(peers, SelectionStrategy.empty_rect(), GossipConfig(), mode=mode, seed=seed)
    return topology


@pytest.mark.parametrize("m, expected", [(1, 0), (2, 0), (3, 1), (4, 1), (5, 2)])
def test_median_index_is_lower_median(m, expected):
    assert median_index(m) == expected


def test_single_peer_tree():
    tree = build_tree(_overlay(1, 2, seed=1), 0)
    assert tree.messages_sent == 0
    assert tree.unreached == frozenset()
    metrics = tree_metrics(tree)
    assert (metrics.max_tree_degree, metrics.longest_root_leaf_hops, metrics.diameter_hops) == (0, 0, 0)


def test_two_peer_tree():
    topology = _overlay(2, 2, seed=2)
    tree = build_tree(topology, 1)
    assert tree.messages_sent == 1
    assert tree.parent == {0: 1}
    assert tree.children(1) == (0,)


def test_forwarding_picks_lower_median_per_orthant():
    p, a, b, c = _peer(0, 5, 5), _peer(1, 6, 9), _peer(2, 8, 8), _peer(3, 9.5, 6)
    topology = Topology.from_peers([p, a, b, c])
    topology.out_neighbors[0] = (1, 2, 3)
    forwards = forwarding_step(topology, 0, Zone.all_space(2))
    # distances 5, 6 and 5.5: the middle one is peer 3
    expected_zone = Zone(HyperRect((Interval(5, INF), Interval(5, INF))))
    assert forwards == ((3, expected_zone),)

    topology.out_neighbors[0] = (1, 3)
    assert forwarding_step(topology, 0, Zone.all_space(2))[0][0] == 1


def test_forwarding_ignores_neighbours_outside_zone():
    topology = Topology.from_peers([_peer(0, 5, 5), _peer(1, 7, 6), _peer(2, 3, 2)])
    topology.out_neighbors[0] = (1, 2)
    zone = Zone(HyperRect.open_box((4, 4), (10, 10)))
    forwards = forwarding_step(topology, 0, zone)
    assert [child for child, _ in forwards] == [1]
    assert forwards[0][1] == Zone(HyperRect.open_box((5, 5), (10, 10)))


def _reference_step(topology, pid, zone):
    origin = topology.peers[pid].coord
    regions = {}
    for q in topology.out_neighbors[pid]:
        coord = topology.peers[q].coord
        if zone.contains(coord):
            regions.setdefault(orthant_of(origin, coord), []).append((l1_distance(origin, coord), q))
    forwards = []
    for region in sorted(regions):
        members = sorted(regions[region])
        chosen = members[median_index(len(members))][1]
        forwards.append((chosen, Zone(intersect(zone.rect, orthant_rect(origin, region)))))
    return tuple(forwards)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_forwarding_table_matches_per_neighbour_reference(d):
    topology = _overlay(60, d, seed=30 + d)
    table = forwarding_table(topology)
    for root in (0, 31):
        tree = build_tree(topology, root, table)
        assert tree.parent == build_tree(topology, root).parent
        for pid, zone in tree.zone_trace.items():
            assert tree.steps[pid] == _reference_step(topology, pid, zone)


def test_forwarding_rejects_neighbour_sharing_a_coordinate():
    topology = Topology.from_peers([_peer(0, 5, 5), _peer(1, 5, 8)])
    topology.out_neighbors[0] = (1,)
    with pytest.raises(DistinctnessError):
        forwarding_step(topology, 0, Zone.all_space(2))


def test_unknown_root_rejected():
    with pytest.raises(UsageError):
        build_tree(_overlay(5, 2, seed=3), 99)


def test_unconverged_topology_is_flagged():
    topology = Topology.from_peers([_peer(0, 1, 1), _peer(1, 2, 2)])
    topology.out_neighbors[0] = (1,)
    tree = build_tree(topology, 0)
    assert not tree.topology_converged
    assert tree.reached == frozenset({0, 1})


@pytest.mark.parametrize("n, d", [(120, 2), (120, 3), (80, 4), (60, 5)])
def test_full_knowledge_trees_are_message_optimal_from_every_root(n, d):
    topology = _overlay(n, d, seed=10 + d)
    table = forwarding_table(topology)
    for root in topology.ids():
        tree = build_tree(topology, root, table)
        assert tree.messages_sent == n - 1
        assert tree.duplicates == 0
        assert tree.unreached == frozenset()
        assert tree.max_children() <= 2 ** d
        assert tree_metrics(tree).max_tree_degree <= 2 ** d + 1


def test_zones_nest_and_contain_their_peers():
    topology = _overlay(150, 2, seed=20)
    tree = build_tree(topology, 17)
    for pid, zone in tree.zone_trace.items():
        assert zone.contains(topology.peers[pid].coord)
        if pid != tree.root:
            parent = tree.parent[pid]
            assert is_subset(zone.rect, tree.zone_trace[parent].rect)
            assert not zone.contains(topology.peers[parent].coord)


def test_tree_is_deterministic():
    topology = _overlay(80, 3, seed=21)
    first, second = build_tree(topology, 5), build_tree(topology, 5)
    assert first.parent == second.parent
    assert first.messages == second.messages


def test_gossip_accounting_identity():
    topology = _overlay(60, 2, seed=22, mode=KnowledgeMode.GOSSIP)
    for root in topology.ids():
        tree = build_tree(topology, root)
        assert tree.messages_sent == len(topology) - 1 - len(tree.unreached)


# ----------------------------------------------------------------------
# Partition verification
# ----------------------------------------------------------------------

def test_step_partition_single_child():
    p, q = _peer(0, 5, 5), _peer(1, 7, 6)
    zone = Zone(HyperRect.open_box((0, 0), (10, 10)))
    child_zone = Zone(HyperRect.open_box((5, 5), (10, 10)))
    report = verify_step_partition(p, zone, [(q, child_zone)], [p, q])
    assert report.passed
    assert report.complete


def test_step_partition_flags_overlap_and_sender():
    p, q, r = _peer(0, 5, 5), _peer(1, 7, 6), _peer(2, 8, 9)
    zone = Zone(HyperRect.open_box((0, 0), (10, 10)))
    shared = Zone(HyperRect.open_box((5, 5), (10, 10)))
    report = verify_step_partition(p, zone, [(q, shared), (r, shared)], [p, q, r])
    assert report.overlapping_zones == ((1, 2),)
    assert report.multiply_covered == (1, 2)
    assert not report.passed

    wide = Zone(HyperRect.open_box((0, 0), (10, 10)))
    report = verify_step_partition(p, zone, [(q, wide)], [p, q])
    assert report.sender_inside == (1,)
    assert not report.passed


def test_step_partition_records_coverage_gap():
    p, q, r = _peer(0, 5, 5), _peer(1, 7, 6), _peer(2, 2, 3)
    zone = Zone(HyperRect.open_box((0, 0), (10, 10)))
    report = verify_step_partition(p, zone, [(q, Zone(HyperRect.open_box((5, 5), (10, 10))))], [p, q, r])
    assert report.passed
    assert report.coverage_gaps == (2,)
    assert not report.complete


def test_step_partition_flags_child_outside_its_zone():
    p, q = _peer(0, 5, 5), _peer(1, 7, 6)
    zone = Zone(HyperRect.open_box((0, 0), (10, 10)))
    report = verify_step_partition(p, zone, [(q, Zone(HyperRect.open_box((5, 0), (10, 5))))], [p, q])
    assert report.children_outside == (1,)


@pytest.mark.parametrize("n, d", [(200, 2), (80, 4), (60, 5)])
def test_every_step_of_full_knowledge_tree_is_complete(n, d):
    topology = _overlay(n, d, seed=23)
    tree = build_tree(topology, 0)
    reports = verify_tree_partitions(tree, topology)
    assert len(reports) == len(topology)
    assert all(r.complete for r in reports)


# ----------------------------------------------------------------------
# Metrics
# ----------------------------------------------------------------------

def test_tree_metrics_on_path():
    zone = Zone.all_space(1)
    tree = MulticastTree(
        root=0,
        n=3,
        parent={1: 0, 2: 1},
        zone_trace={0: zone, 1: zone, 2: zone},
        steps={0: ((1, zone),), 1: ((2, zone),), 2: ()},
        messages=[(0, 1), (1, 2)],
    )
    metrics = tree_metrics(tree)
    assert metrics.max_tree_degree == 2
    assert metrics.longest_root_leaf_hops == 2
    assert metrics.diameter_hops == 2
    assert metrics.max_children == 1
