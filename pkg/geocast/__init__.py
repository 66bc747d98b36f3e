"""Geometric overlay construction, multicast trees and stability trees for P2P simulation."""

from geocast.config import (
    DistanceKind,
    ExperimentId,
    HyperplaneFamily,
    InsertionMode,
    KnowledgeMode,
    PreferredRule,
    Preset,
    RunConfig,
    StrategyKind,
    UpdateOrder,
    derive_seed,
)
from geocast.error_handling import (
    DistinctnessError,
    ErrorAggregator,
    ErrorCategory,
    GenerationError,
    NonConvergenceError,
    ReportIOError,
    SimulationError,
    UsageError,
    VerificationError,
)
from geocast.geometry import HyperplaneSet, HyperRect, Interval, SpaceSpec
from geocast.multicast import MulticastTree, Zone, build_tree, verify_step_partition, verify_tree_partitions
from geocast.overlay import (
    FullKnowledge,
    GossipConfig,
    Peer,
    SelectionStrategy,
    Topology,
    build_overlay,
    converge,
    generate_peers,
    insert_peer,
    knowledge_round,
    remove_peer,
    select_neighbors,
)
from geocast.stability import (
    StabilityConfig,
    build_stability_tree,
    embed_lifetimes,
    preferred_neighbor,
    simulate_departures,
    verify_monotone,
)

__version__ = "0.1.0"

__all__ = [
    "DistanceKind",
    "DistinctnessError",
    "ErrorAggregator",
    "ErrorCategory",
    "ExperimentId",
    "FullKnowledge",
    "GenerationError",
    "GossipConfig",
    "HyperRect",
    "HyperplaneFamily",
    "HyperplaneSet",
    "InsertionMode",
    "Interval",
    "KnowledgeMode",
    "MulticastTree",
    "NonConvergenceError",
    "Peer",
    "PreferredRule",
    "Preset",
    "ReportIOError",
    "RunConfig",
    "SelectionStrategy",
    "SimulationError",
    "SpaceSpec",
    "StabilityConfig",
    "StrategyKind",
    "Topology",
    "UpdateOrder",
    "UsageError",
    "VerificationError",
    "Zone",
    "build_overlay",
    "build_stability_tree",
    "build_tree",
    "converge",
    "derive_seed",
    "embed_lifetimes",
    "generate_peers",
    "insert_peer",
    "knowledge_round",
    "preferred_neighbor",
    "remove_peer",
    "select_neighbors",
    "simulate_departures",
    "verify_monotone",
    "verify_step_partition",
    "verify_tree_partitions",
]
