"""Tests for lifetime embedding and preferred-neighbour stability trees."""

import pytest

from geocast.config import PreferredRule
from geocast.error_handling import DistinctnessError, UsageError
from geocast.geometry import SpaceSpec
from geocast.overlay import Peer, Topology
from geocast.stability import (
    StabilityConfig,
    StabilityTree,
    build_lifetime_overlay,
    build_stability_tree,
    embed_lifetimes,
    preferred_neighbor,
    simulate_departures,
    verify_monotone,
)


def _peer(pid, lifetime, *coord):
    coord = coord or (float(pid), float(pid))
    return Peer(pid, tuple(float(c) for c in coord), f"sim://peer-{pid}:7000", lifetime)


def _chain():
    peers = [_peer(0, 5.0), _peer(1, 7.0), _peer(2, 9.0)]
    topology = Topology.from_peers(peers)
    topology.out_neighbors.update({0: (1,), 1: (0, 2), 2: (1,)})
    return topology


def test_embed_maps_lifetimes_onto_the_time_axis():
    spec = SpaceSpec(2, 100.0)
    peers = [_peer(0, 10.0, 1, 1), _peer(1, 30.0, 2, 2), _peer(2, 20.0, 3, 3)]
    embedded = embed_lifetimes(peers, StabilityConfig(time_coord_index=2), spec)
    assert [p.coord for p in embedded] == [(1.0, 0.0), (2.0, 100.0), (3.0, 50.0)]
    assert [p.lifetime for p in embedded] == [10.0, 30.0, 20.0]


def test_embed_single_peer_sits_mid_axis():
    embedded = embed_lifetimes([_peer(0, 4.0, 1, 1)], StabilityConfig(), SpaceSpec(2, 10.0))
    assert embedded[0].coord == (5.0, 1.0)


def test_embed_rejects_bad_input():
    spec = SpaceSpec(2)
    with pytest.raises(DistinctnessError):
        embed_lifetimes([_peer(0, 1.0), _peer(1, 1.0)], StabilityConfig(), spec)
    with pytest.raises(UsageError):
        embed_lifetimes([_peer(0, None)], StabilityConfig(), spec)
    with pytest.raises(UsageError):
        embed_lifetimes([_peer(0, 1.0)], StabilityConfig(time_coord_index=3), spec)
    with pytest.raises(UsageError):
        embed_lifetimes([_peer(0, 1.0, 5, 2000)], StabilityConfig(), spec)
    with pytest.raises(UsageError):
        embed_lifetimes([_peer(0, 1.0, 5, 5, 5)], StabilityConfig(), spec)


def test_preferred_neighbor_rules():
    peer = _peer(0, 5.0)
    neighbours = [_peer(1, 3.0), _peer(2, 7.0), _peer(3, 9.0)]
    assert preferred_neighbor(peer, neighbours).id == 3
    assert preferred_neighbor(peer, neighbours, PreferredRule.MIN_LIFETIME_ABOVE).id == 2
    assert preferred_neighbor(peer, neighbours, PreferredRule.NEAREST).id == 2
    assert preferred_neighbor(peer, [_peer(1, 1.0), _peer(2, 2.0)]) is None
    assert preferred_neighbor(peer, []) is None


def test_chain_forms_monotone_tree():
    topology = _chain()
    tree = build_stability_tree(topology)
    assert tree.preferred == {0: 1, 1: 2, 2: None}
    assert tree.root_candidates == (2,)
    assert tree.is_single_tree
    assert tree.components[0].size == 3

    report = verify_monotone(tree, topology.peers)
    assert report.passed
    assert report.root == 2
    assert report.diameter_hops == 2
    assert report.max_degree == 2

    departures = simulate_departures(tree, topology.peers.values())
    assert departures.order == (0, 1, 2)
    assert departures.passed
    assert departures.disconnections == 0


def test_isolated_peers_give_a_forest():
    topology = Topology.from_peers([_peer(0, 1.0), _peer(1, 2.0), _peer(2, 3.0)])
    topology.out_neighbors.update({0: (1,), 1: (0,), 2: ()})
    tree = build_stability_tree(topology)
    assert not tree.is_single_tree
    assert tree.root_candidates == (1, 2)
    assert [(c.root, c.size) for c in tree.components] == [(1, 2), (2, 1)]


def test_corrupted_tree_is_detected():
    peers = {0: _peer(0, 9.0), 1: _peer(1, 2.0)}
    tree = StabilityTree(preferred={0: 1, 1: None}, root_candidates=(1,), is_single_tree=True)
    report = verify_monotone(tree, peers)
    assert not report.passed
    assert report.violations == ((1, 0),)

    departures = simulate_departures(tree, peers)
    assert departures.non_leaf_departures == ((1, 1),)
    assert not departures.passed


def test_stability_tree_requires_lifetimes():
    topology = Topology.from_peers([_peer(0, None)])
    with pytest.raises(UsageError):
        build_stability_tree(topology)


@pytest.mark.parametrize("d, k", [(2, 1), (3, 2)])
def test_lifetime_overlay_gives_single_stable_tree(d, k):
    topology, _ = build_lifetime_overlay(200, SpaceSpec(d), seed=7, k=k)
    tree = build_stability_tree(topology)
    assert tree.is_single_tree
    last = max(topology.peers.values(), key=lambda p: p.lifetime)
    assert tree.root_candidates == (last.id,)

    assert verify_monotone(tree, topology.peers).passed
    assert simulate_departures(tree, topology.peers).passed
