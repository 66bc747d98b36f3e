"""Experiment plans, metric rows and result writers.

A plan is a list of independent cells plus the function that runs one cell.
Cells never share state, so the orchestrator may run them in any order; rows
and checks are sorted when the result is collected.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from geocast.config import (
    ExperimentId, InsertionMode, KnowledgeMode, Preset, RunConfig, StrategyKind, derive_seed,
)
from geocast.error_handling import ErrorAggregator, ReportIOError, UsageError
from geocast.geometry import SpaceSpec
from geocast.multicast import build_tree, forwarding_table, tree_metrics, verify_tree_partitions
from geocast.oracle import ORACLE_MAX_PEERS, check_delivery, check_full_knowledge_equilibrium, check_knowledge_round
from geocast.overlay import (
    GossipConfig, Peer, SelectionStrategy, Topology, build_overlay, converge, generate_peers,
    neighbor_jaccard, remove_peer, topology_metrics,
)
from geocast.stability import (
    StabilityConfig, build_lifetime_overlay, build_stability_tree, simulate_departures, verify_monotone,
)

logger = structlog.get_logger(__name__)

METRIC_NAMES: FrozenSet[str] = frozenset({
    "max_topo_degree",
    "avg_topo_degree",
    "max_root_leaf_path",
    "avg_max_root_leaf_path",
    "messages_sent",
    "duplicates",
    "unreached",
    "children_max",
    "tree_diameter",
    "stab_tree_max_degree",
    "is_single_tree",
    "convergence_rounds",
    "jaccard_vs_full",
    "monotone_pass",
    "disconnections",
    "root_candidates",
    "largest_component",
    "coverage_gaps",
    "knowledge_mismatches",
    "equilibrium_mismatches",
    "delivery_mismatches",
    "partition_violations",
})

CSV_HEADER = ("experiment", "run_id", "seed", "N", "D", "K", "strategy", "metric_name", "value")

# full-knowledge batch mode is forced above this size in the degree sweep
FAST_MODE_THRESHOLD = 1000
REDUCED_MAX_N = 300
CHURN_MAX_N = 300

MetricValue = Union[bool, int, float]


def format_value(value: MetricValue) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6f}"


@dataclass(frozen=True)
class MetricsRow:
    experiment: str
    run_id: str
    seed: int
    n: int
    d: int
    k: int
    strategy: str
    metric_name: str
    value: MetricValue

    def __post_init__(self) -> None:
        if self.metric_name not in METRIC_NAMES:
            raise UsageError(f"Unknown metric name: {self.metric_name}")

    def sort_key(self) -> Tuple[Any, ...]:
        return (self.experiment, self.run_id, self.seed, self.n, self.d, self.k,
                self.strategy, self.metric_name, float(self.value))

    def csv_fields(self) -> List[str]:
        return [self.experiment, self.run_id, str(self.seed), str(self.n), str(self.d), str(self.k),
                self.strategy, self.metric_name, format_value(self.value)]


@dataclass(frozen=True)
class Cell:
    """One independent unit of a sweep"""
    experiment: str
    n: int
    d: int
    k: int
    replica: int
    seed: int
    strategy: StrategyKind
    mode: KnowledgeMode
    insertion: InsertionMode

    @property
    def name(self) -> str:
        return (f"{self.experiment}-n{self.n}-d{self.d}-k{self.k}-{self.strategy.value}"
                f"-{self.mode.value}-{self.insertion.value}-r{self.replica:02d}")


@dataclass
class CellResult:
    cell: Cell
    rows: List[MetricsRow] = field(default_factory=list)
    checks: Dict[str, bool] = field(default_factory=dict)
    # (root, size) per preferred-link component when they form a forest
    forest: List[Dict[str, int]] = field(default_factory=list)

    def emit(self, metric: str, value: MetricValue) -> None:
        c = self.cell
        self.rows.append(MetricsRow(c.experiment, c.name, c.seed, c.n, c.d, c.k, c.strategy.value, metric, value))

    def metric(self, name: str) -> Optional[MetricValue]:
        for row in self.rows:
            if row.metric_name == name:
                return row.value
        return None


CellRunner = Callable[[RunConfig, Cell], CellResult]
Finalizer = Callable[[Sequence[CellResult]], Dict[str, bool]]


@dataclass
class ExperimentPlan:
    experiment: str
    config: RunConfig
    cells: List[Cell]
    run_cell: CellRunner
    finalize: Optional[Finalizer] = None

    def execute(self, cell: Cell) -> CellResult:
        log = logger.bind(cell=cell.name, seed=cell.seed)
        log.debug("cell started")
        result = self.run_cell(self.config, cell)
        log.debug("cell finished", rows=len(result.rows))
        return result


@dataclass
class ExperimentResult:
    experiment: str
    config: RunConfig
    rows: List[MetricsRow]
    checks: Dict[str, bool]
    errors: ErrorAggregator = field(default_factory=ErrorAggregator)
    wall_time: Optional[float] = None
    forests: Dict[str, List[Dict[str, int]]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not len(self.errors) and all(self.checks.values())

    def failed_checks(self) -> List[str]:
        return [name for name, ok in self.checks.items() if not ok]

    def report(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "experiment": self.experiment,
            "config": self.config.echo(),
            "rows": len(self.rows),
            "checks": dict(sorted(self.checks.items())),
            "errors": self.errors.get_error_summary(),
            "passed": self.passed,
        }
        if self.forests:
            data["forests"] = self.forests
        if self.config.include_timings and self.wall_time is not None:
            data["wall_time_seconds"] = round(self.wall_time, 3)
        return data


def collect_results(
    plan: ExperimentPlan,
    results: Iterable[CellResult],
    errors: Optional[ErrorAggregator] = None,
    wall_time: Optional[float] = None,
) -> ExperimentResult:
    """Merge cell outputs into one scheduling-independent result."""
    ordered = sorted(results, key=lambda r: r.cell.name)
    rows = sorted((row for r in ordered for row in r.rows), key=MetricsRow.sort_key)
    checks: Dict[str, bool] = {}
    for result in ordered:
        for name, ok in result.checks.items():
            checks[f"{result.cell.name}:{name}"] = bool(ok)
    if plan.finalize is not None and ordered:
        checks.update(plan.finalize(ordered))
    return ExperimentResult(
        experiment=plan.experiment,
        config=plan.config,
        rows=rows,
        checks=dict(sorted(checks.items())),
        errors=errors if errors is not None else ErrorAggregator(),
        wall_time=wall_time,
        forests={result.cell.name: result.forest for result in ordered if result.forest},
    )


def run_serial(plan: ExperimentPlan) -> ExperimentResult:
    """Run every cell in this thread; failures are aggregated, not raised."""
    errors = ErrorAggregator()
    results = []
    for cell in plan.cells:
        try:
            results.append(plan.execute(cell))
        except Exception as exc:
            errors.add_error(cell.name, exc)
    return collect_results(plan, results, errors)


# ----------------------------------------------------------------------
# Cell helpers
# ----------------------------------------------------------------------

def _strategy(config: RunConfig, cell: Cell) -> SelectionStrategy:
    return SelectionStrategy.for_space(cell.strategy, cell.d, cell.k, config.distance, config.hyperplanes)


def _overlay(config: RunConfig, cell: Cell, peers: Sequence[Peer], strategy: SelectionStrategy,
             mode: Optional[KnowledgeMode] = None,
             insertion: Optional[InsertionMode] = None) -> Tuple[Topology, int]:
    return build_overlay(
        peers,
        strategy,
        GossipConfig.from_config(config),
        mode=mode or cell.mode,
        insertion=insertion or cell.insertion,
        seed=cell.seed,
        max_rounds=config.resolved_max_rounds(len(peers)),
        update_order=config.update_order,
    )


def _emit_topology(result: CellResult, topology: Topology, rounds: int) -> None:
    metrics = topology_metrics(topology)
    result.emit("max_topo_degree", metrics.max_degree)
    result.emit("avg_topo_degree", metrics.avg_degree)
    result.emit("convergence_rounds", rounds)


def _emit_jaccard(result: CellResult, config: RunConfig, peers: Sequence[Peer],
                  strategy: SelectionStrategy, topology: Topology) -> None:
    cell = result.cell
    if cell.mode is KnowledgeMode.FULL and cell.insertion is InsertionMode.BATCH:
        return
    reference, _ = _overlay(config, cell, peers, strategy, KnowledgeMode.FULL, InsertionMode.BATCH)
    result.emit("jaccard_vs_full", neighbor_jaccard(topology.out_neighbors, reference.out_neighbors))


def _roots(config: RunConfig, cell: Cell, ids: Sequence[int]) -> List[int]:
    if config.root_sample is None or config.root_sample >= len(ids):
        return list(ids)
    rng = np.random.default_rng(derive_seed(cell.seed, "roots"))
    return sorted(int(pid) for pid in rng.choice(np.array(ids), size=config.root_sample, replace=False))


def _measure_trees(result: CellResult, topology: Topology, roots: Sequence[int], run_oracles: bool,
                   allow_large: bool = False) -> None:
    """Per-root multicast metrics aggregated over roots, plus embedded checks."""
    cell = result.cell
    exact = cell.strategy is StrategyKind.EMPTY_RECT and cell.mode is KnowledgeMode.FULL
    messages, unreached, children, longest, diameters = [], [], [], [], []
    duplicates = 0
    identity = optimal = True
    gaps = violations = delivery_mismatches = 0
    table = forwarding_table(topology)

    for root in roots:
        tree = build_tree(topology, root, table)
        stats = tree_metrics(tree)
        messages.append(tree.messages_sent)
        unreached.append(len(tree.unreached))
        children.append(stats.max_children)
        longest.append(stats.longest_root_leaf_hops)
        diameters.append(stats.diameter_hops)
        duplicates += tree.duplicates
        identity &= tree.messages_sent == cell.n - 1 - len(tree.unreached)
        optimal &= tree.messages_sent == cell.n - 1 and tree.duplicates == 0 and not tree.unreached
        if run_oracles:
            reports = verify_tree_partitions(tree, topology)
            gaps += sum(len(r.coverage_gaps) for r in reports)
            violations += sum(not r.passed for r in reports)
            delivery_mismatches += len(check_delivery(tree, topology.peers, allow_large).mismatches)

    result.emit("messages_sent", max(messages))
    result.emit("duplicates", duplicates)
    result.emit("unreached", max(unreached))
    result.emit("children_max", max(children))
    result.emit("max_root_leaf_path", max(longest))
    result.emit("avg_max_root_leaf_path", math.fsum(longest) / len(longest))
    result.emit("tree_diameter", max(diameters))

    result.checks["message_identity"] = identity
    result.checks["children_bound"] = max(children) <= 2 ** cell.d
    if exact:
        result.checks["message_optimal"] = optimal
    if run_oracles:
        result.emit("coverage_gaps", gaps)
        result.emit("partition_violations", violations)
        result.emit("delivery_mismatches", delivery_mismatches)
        result.checks["step_partition"] = violations == 0
        result.checks["delivery"] = delivery_mismatches == 0
        if exact:
            result.checks["no_coverage_gaps"] = gaps == 0


# ----------------------------------------------------------------------
# Cell runners
# ----------------------------------------------------------------------

def run_overlay_cell(config: RunConfig, cell: Cell) -> CellResult:
    result = CellResult(cell)
    peers = generate_peers(cell.n, SpaceSpec(cell.d, config.vmax), cell.seed)
    strategy = _strategy(config, cell)
    topology, rounds = _overlay(config, cell, peers, strategy)
    _emit_topology(result, topology, rounds)
    _emit_jaccard(result, config, peers, strategy, topology)
    try:
        topology.check_well_formed()
        result.checks["well_formed"] = True
    except UsageError:
        result.checks["well_formed"] = False
    return result


def run_multicast_cell(config: RunConfig, cell: Cell) -> CellResult:
    result = CellResult(cell)
    peers = generate_peers(cell.n, SpaceSpec(cell.d, config.vmax), cell.seed)
    strategy = _strategy(config, cell)
    topology, rounds = _overlay(config, cell, peers, strategy)
    _emit_topology(result, topology, rounds)
    _emit_jaccard(result, config, peers, strategy, topology)
    if cell.experiment == "multicast":
        roots = [config.root]
    else:
        roots = _roots(config, cell, topology.ids())
    _measure_trees(result, topology, roots, run_oracles=cell.n <= ORACLE_MAX_PEERS)
    return result


def run_stability_cell(config: RunConfig, cell: Cell) -> CellResult:
    result = CellResult(cell)
    spec = SpaceSpec(cell.d, config.vmax)
    stab = StabilityConfig(config.time_coord_index, config.preferred_rule)
    topology, rounds = build_lifetime_overlay(
        cell.n, spec, cell.seed, cell.k, stab,
        gossip=GossipConfig.from_config(config),
        mode=cell.mode,
        insertion=cell.insertion,
        max_rounds=config.resolved_max_rounds(cell.n),
        update_order=config.update_order,
        strategy=_strategy(config, cell),
    )
    tree = build_stability_tree(topology, stab)
    monotone = verify_monotone(tree, topology.peers)
    departures = simulate_departures(tree, topology.peers)

    _emit_topology(result, topology, rounds)
    result.emit("is_single_tree", tree.is_single_tree)
    result.emit("root_candidates", len(tree.root_candidates))
    result.emit("monotone_pass", monotone.passed)
    result.emit("stab_tree_max_degree", monotone.max_degree)
    result.emit("tree_diameter", monotone.diameter_hops)
    result.emit("disconnections", departures.disconnections)
    result.emit("largest_component", tree.components[0].size if tree.components else 0)

    result.checks["single_tree"] = tree.is_single_tree
    result.checks["monotone"] = monotone.passed
    result.checks["no_disconnections"] = departures.passed
    if not tree.is_single_tree:
        result.forest = [{"root": c.root, "size": c.size} for c in tree.components]
        logger.warning(
            "stability forest",
            cell=cell.name,
            components=len(tree.components),
            largest=tree.components[0].size,
        )
    return result


def run_churn_cell(config: RunConfig, cell: Cell) -> CellResult:
    """Incremental build, then departures in lifetime order with convergence after each."""
    result = CellResult(cell)
    peers = generate_peers(cell.n, SpaceSpec(cell.d, config.vmax), cell.seed, with_lifetimes=True)
    strategy = _strategy(config, cell)
    gossip = GossipConfig.from_config(config)
    topology, _ = _overlay(config, cell, peers, strategy)

    departing = sorted(peers, key=lambda p: (p.lifetime, p.id))[: cell.n // 2]
    rounds = 0
    for peer in departing:
        remove_peer(topology, peer.id)
        rounds += converge(
            topology, gossip, strategy, config.resolved_max_rounds(len(topology)),
            cell.mode, config.update_order,
        ).rounds

    survivors = [p for p in peers if p.id in topology.peers]
    reference, _ = _overlay(config, cell, survivors, strategy, KnowledgeMode.FULL, InsertionMode.BATCH)
    metrics = topology_metrics(topology)
    result.emit("max_topo_degree", metrics.max_degree)
    result.emit("avg_topo_degree", metrics.avg_degree)
    result.emit("convergence_rounds", rounds)
    result.emit("jaccard_vs_full", neighbor_jaccard(topology.out_neighbors, reference.out_neighbors))
    result.checks["converged"] = topology.converged
    return result


def run_verify_cell(config: RunConfig, cell: Cell) -> CellResult:
    """All oracle checks on one seeded instance."""
    result = CellResult(cell)
    peers = generate_peers(cell.n, SpaceSpec(cell.d, config.vmax), cell.seed)
    strategy = _strategy(config, cell)
    gossip = GossipConfig.from_config(config)

    gossiped, _ = _overlay(config, cell, peers, strategy, KnowledgeMode.GOSSIP, InsertionMode.BATCH)
    full, rounds = _overlay(config, cell, peers, strategy, KnowledgeMode.FULL, InsertionMode.BATCH)
    knowledge = sum(
        len(check_knowledge_round(topology, gossip, config.allow_large).mismatches)
        for topology in (gossiped, full)
    )
    equilibrium = check_full_knowledge_equilibrium(full, strategy, config.allow_large)

    _emit_topology(result, full, rounds)
    result.emit("knowledge_mismatches", knowledge)
    result.emit("equilibrium_mismatches", len(equilibrium.mismatches))
    result.checks["knowledge_round"] = knowledge == 0
    result.checks["equilibrium"] = equilibrium.passed
    _measure_trees(result, full, _roots(config, cell, full.ids()), run_oracles=True, allow_large=config.allow_large)
    return result


# ----------------------------------------------------------------------
# Plans
# ----------------------------------------------------------------------

def _scaled_n(config: RunConfig) -> int:
    return min(config.n, REDUCED_MAX_N) if config.preset is Preset.REDUCED else config.n


def _reduced(config: RunConfig) -> bool:
    return config.preset is Preset.REDUCED


def _make_cell(
    config: RunConfig,
    experiment: str,
    n: int,
    d: int,
    k: int,
    replica: int,
    strategy: StrategyKind,
    mode: KnowledgeMode,
    insertion: InsertionMode,
    seed: Optional[int] = None,
) -> Cell:
    if seed is None:
        seed = derive_seed(
            config.seed, experiment, n=n, d=d, k=k, replica=replica,
            strategy=strategy.value, mode=mode.value, insertion=insertion.value,
        )
    return Cell(experiment, n, d, k, replica, seed, strategy, mode, insertion)


def _check_time_index(config: RunConfig, dims: Sequence[int]) -> None:
    if config.time_coord_index > min(dims):
        raise UsageError(
            f"time_coord_index {config.time_coord_index} exceeds the smallest swept dimension {min(dims)}"
        )


def plan_fig1ab(config: RunConfig) -> ExperimentPlan:
    dims = config.sweep_d or ([2, 3] if _reduced(config) else [2, 3, 4, 5])
    n = _scaled_n(config)
    cells = [
        _make_cell(config, ExperimentId.FIG1AB.value, n, d, config.k, r,
                   config.strategy, config.knowledge_mode, config.insertion)
        for d in dims for r in range(config.seeds)
    ]
    return ExperimentPlan(ExperimentId.FIG1AB.value, config, cells, run_multicast_cell)


def degree_trend_checks(results: Sequence[CellResult]) -> Dict[str, bool]:
    """Per replica: avg degree over log2(N) within 2x, sublinear and monotone in N."""
    by_replica: Dict[int, List[Tuple[int, float]]] = {}
    for result in results:
        avg = result.metric("avg_topo_degree")
        if avg is not None:
            by_replica.setdefault(result.cell.replica, []).append((result.cell.n, float(avg)))

    checks: Dict[str, bool] = {}
    for replica, points in sorted(by_replica.items()):
        points.sort()
        if len(points) < 2:
            continue
        prefix = f"{ExperimentId.FIG1C.value}-r{replica:02d}"
        ratios = [avg / math.log2(n) for n, avg in points if n >= 2]
        if ratios and min(ratios) > 0:
            checks[f"{prefix}:log_ratio_within_2x"] = max(ratios) <= 2 * min(ratios)
        (n_lo, avg_lo), (n_hi, avg_hi) = points[0], points[-1]
        checks[f"{prefix}:sublinear"] = avg_lo > 0 and avg_hi / avg_lo < n_hi / n_lo
        checks[f"{prefix}:monotone"] = all(b[1] >= a[1] for a, b in zip(points, points[1:]))
    return checks


def plan_fig1c(config: RunConfig) -> ExperimentPlan:
    sizes = config.sweep_n or ([50, 100, 200, 300] if _reduced(config) else [100, 500, 1000, 2000, 5000])
    cells = []
    for n in sizes:
        fast = n > FAST_MODE_THRESHOLD
        mode = KnowledgeMode.FULL if fast else config.knowledge_mode
        insertion = InsertionMode.BATCH if fast else config.insertion
        for r in range(config.seeds):
            cells.append(_make_cell(config, ExperimentId.FIG1C.value, n, 2, config.k, r,
                                    config.strategy, mode, insertion))
    return ExperimentPlan(ExperimentId.FIG1C.value, config, cells, run_overlay_cell, degree_trend_checks)


def plan_fig1de(config: RunConfig) -> ExperimentPlan:
    dims = config.sweep_d or ([2, 3, 5] if _reduced(config) else list(range(2, 11)))
    ks = config.sweep_k or ([1, 5, 20] if _reduced(config) else [1, 2, 5, 10, 20, 50])
    _check_time_index(config, dims)
    n = _scaled_n(config)
    cells = [
        _make_cell(config, ExperimentId.FIG1DE.value, n, d, k, r,
                   StrategyKind.ORTHO_HP, config.knowledge_mode, config.insertion)
        for d in dims for k in ks for r in range(config.seeds)
    ]
    return ExperimentPlan(ExperimentId.FIG1DE.value, config, cells, run_stability_cell)


def plan_churn(config: RunConfig) -> ExperimentPlan:
    dims = config.sweep_d or [config.d]
    sizes = config.sweep_n or [min(config.n, CHURN_MAX_N)]
    cells = [
        _make_cell(config, ExperimentId.CHURN.value, n, d, config.k, r,
                   config.strategy, config.knowledge_mode, InsertionMode.INCREMENTAL)
        for n in sizes for d in dims for r in range(config.seeds)
    ]
    return ExperimentPlan(ExperimentId.CHURN.value, config, cells, run_churn_cell)


PLANNERS: Dict[ExperimentId, Callable[[RunConfig], ExperimentPlan]] = {
    ExperimentId.FIG1AB: plan_fig1ab,
    ExperimentId.FIG1C: plan_fig1c,
    ExperimentId.FIG1DE: plan_fig1de,
    ExperimentId.CHURN: plan_churn,
}


def _rows_or_raise(plan: ExperimentPlan) -> List[MetricsRow]:
    result = run_serial(plan)
    first = result.errors.first()
    if first is not None:
        raise first
    return result.rows


def exp_fig1ab(config: RunConfig) -> List[MetricsRow]:
    """Multicast tree metrics over D, run in this thread."""
    return _rows_or_raise(plan_fig1ab(config))


def exp_fig1c(config: RunConfig) -> List[MetricsRow]:
    return _rows_or_raise(plan_fig1c(config))


def exp_fig1de(config: RunConfig) -> List[MetricsRow]:
    return _rows_or_raise(plan_fig1de(config))


def exp_churn(config: RunConfig) -> List[MetricsRow]:
    return _rows_or_raise(plan_churn(config))


def plan_experiment(config: RunConfig) -> ExperimentPlan:
    if config.experiment is None:
        raise UsageError("No experiment selected; pass --id or set 'experiment' in the config file")
    plan = PLANNERS[config.experiment](config)
    logger.info("experiment planned", experiment=plan.experiment, cells=len(plan.cells))
    return plan


def plan_command(command: str, config: RunConfig) -> ExperimentPlan:
    """Plans for the single-run commands: overlay, multicast, stability, verify."""
    if command == "verify":
        if config.n > ORACLE_MAX_PEERS and not config.allow_large:
            raise UsageError(
                f"verify is limited to {ORACLE_MAX_PEERS} peers, got {config.n}",
                {"n": config.n, "cap": ORACLE_MAX_PEERS},
            )
        dims = config.sweep_d or [config.d]
        cells = [
            _make_cell(config, "verify", config.n, d, config.k, r,
                       config.strategy, KnowledgeMode.FULL, InsertionMode.BATCH)
            for d in dims for r in range(config.seeds)
        ]
        return ExperimentPlan("verify", config, cells, run_verify_cell)

    if command == "overlay":
        runner, strategy = run_overlay_cell, config.strategy
    elif command == "multicast":
        if config.root >= config.n:
            raise UsageError(f"Root {config.root} is not a peer id in [0, {config.n})")
        runner, strategy = run_multicast_cell, config.strategy
    elif command == "stability":
        _check_time_index(config, [config.d])
        runner, strategy = run_stability_cell, StrategyKind.ORTHO_HP
    else:
        raise UsageError(f"Unknown command: {command}")

    cell = _make_cell(config, command, config.n, config.d, config.k, 0, strategy,
                      config.knowledge_mode, config.insertion, seed=config.seed)
    return ExperimentPlan(command, config, [cell], runner)


# ----------------------------------------------------------------------
# Writers
# ----------------------------------------------------------------------

def write_csv(rows: Iterable[MetricsRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in sorted(rows, key=MetricsRow.sort_key):
                writer.writerow(row.csv_fields())
    except OSError as exc:
        raise ReportIOError(f"Cannot write {path}: {exc}", {"path": str(path)}) from exc
    return path


def report_path(csv_path: Union[str, Path]) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(f"{csv_path.stem}.report.json")


def write_report(result: ExperimentResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(result.report(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(f"Cannot write {path}: {exc}", {"path": str(path)}) from exc
    return path
