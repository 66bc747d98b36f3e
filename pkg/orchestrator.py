#!/usr/bin/env python3
"""
Experiment Orchestrator

Runs the independent cells of an experiment plan concurrently, tracks
per-cell health and merges the outputs into one deterministic result.
"""

from __future__ import annotations

import asyncio
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional

import structlog

from geocast.error_handling import ErrorAggregator
from geocast.experiments import Cell, CellResult, ExperimentPlan, ExperimentResult, collect_results

logger = structlog.get_logger(__name__)


class CellStatus(Enum):
    """Status of a sweep cell"""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class CellHealth:
    """Health of one cell run"""
    name: str
    status: CellStatus = CellStatus.PENDING
    duration: Optional[float] = None
    rows: int = 0
    error: Optional[str] = None


class ExperimentOrchestrator:
    """Schedules plan cells on a bounded worker pool"""

    def __init__(self, jobs: int = 1):
        if jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {jobs}")
        self.jobs = jobs
        self.logger = logger.bind(component="orchestrator")
        self.health: Dict[str, CellHealth] = {}
        self.errors = ErrorAggregator()

    async def _run_cell(
        self,
        plan: ExperimentPlan,
        cell: Cell,
        semaphore: asyncio.Semaphore,
        executor: ThreadPoolExecutor,
    ) -> Optional[CellResult]:
        health = self.health[cell.name]
        async with semaphore:
            health.status = CellStatus.RUNNING
            started = time.perf_counter()
            loop = asyncio.get_running_loop()
            try:
                result = await loop.run_in_executor(executor, plan.execute, cell)
            except Exception as e:
                health.status = CellStatus.FAILED
                health.error = str(e)
                self.errors.add_error(cell.name, e)
                return None
            finally:
                health.duration = time.perf_counter() - started

        health.status = CellStatus.COMPLETED
        health.rows = len(result.rows)
        return result

    async def run_async(self, plan: ExperimentPlan) -> ExperimentResult:
        self.health = {cell.name: CellHealth(cell.name) for cell in plan.cells}
        self.errors = ErrorAggregator()
        semaphore = asyncio.Semaphore(self.jobs)
        started = time.perf_counter()

        self.logger.info("running experiment", experiment=plan.experiment, cells=len(plan.cells), jobs=self.jobs)
        with ThreadPoolExecutor(max_workers=self.jobs, thread_name_prefix="cell") as executor:
            outcomes = await asyncio.gather(
                *(self._run_cell(plan, cell, semaphore, executor) for cell in plan.cells)
            )

        results: List[CellResult] = [r for r in outcomes if r is not None]
        result = collect_results(plan, results, self.errors, time.perf_counter() - started)
        self.logger.info(
            "experiment finished",
            experiment=plan.experiment,
            completed=len(results),
            failed=len(self.errors),
            rows=len(result.rows),
            passed=result.passed,
        )
        return result

    def run(self, plan: ExperimentPlan) -> ExperimentResult:
        return asyncio.run(self.run_async(plan))

    def health_summary(self) -> Dict[str, Any]:
        counts: Dict[str, int] = {}
        for health in self.health.values():
            counts[health.status.value] = counts.get(health.status.value, 0) + 1
        failed = sorted(name for name, h in self.health.items() if h.status is CellStatus.FAILED)
        return {"cells": len(self.health), "by_status": dict(sorted(counts.items())), "failed": failed}
