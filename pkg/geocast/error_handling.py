"""
Error categories and exception hierarchy for the geocast simulator.

Every failure raised by the library is a SimulationError carrying a category,
so the CLI can map it to an exit status and a single-line JSON record.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Tuple

import structlog

logger = structlog.get_logger(__name__)


class ErrorCategory(Enum):
    """Categories of errors for appropriate handling"""
    USAGE = "usage"
    DISTINCTNESS = "distinctness"
    GENERATION = "generation"
    CONVERGENCE = "convergence"
    VERIFICATION = "verification"
    IO = "io"
    UNKNOWN = "unknown"


class SimulationError(Exception):
    """Base exception for simulator errors"""

    def __init__(
        self,
        message: str,
        category: ErrorCategory = ErrorCategory.UNKNOWN,
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.category = category
        self.details: Dict[str, Any] = dict(details or {})
        self.timestamp = datetime.now(timezone.utc)

    @property
    def exit_code(self) -> int:
        return 2 if self.category is ErrorCategory.USAGE else 1

    def to_record(self) -> Dict[str, Any]:
        """Machine-readable form used for the stderr error line."""
        return {
            "error": type(self).__name__,
            "category": self.category.value,
            "message": str(self),
            "details": self.details,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True, default=str)


class UsageError(SimulationError, ValueError):
    """Bad arguments: dimension mismatch, unknown ids, parameter ranges"""
    def __init__(self, message: str = "Usage error", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, ErrorCategory.USAGE, details)


class DistinctnessError(SimulationError):
    """Two coordinates coincide in a dimension where they must differ"""
    def __init__(self, message: str = "Coordinate distinctness violated", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, ErrorCategory.DISTINCTNESS, details)


class GenerationError(SimulationError):
    """Peer generation could not satisfy its constraints"""
    def __init__(self, message: str = "Peer generation failed", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, ErrorCategory.GENERATION, details)


class NonConvergenceError(SimulationError):
    """Overlay did not reach a fixed point within max_rounds"""

    def __init__(
        self,
        rounds: int,
        previous: Mapping[int, Tuple[int, ...]],
        last: Mapping[int, Tuple[int, ...]],
    ):
        changed = sorted(pid for pid in last if previous.get(pid) != last[pid])
        super().__init__(
            f"Overlay did not converge within {rounds} rounds",
            ErrorCategory.CONVERGENCE,
            {"rounds": rounds, "changed_peers": changed[:20], "changed_count": len(changed)},
        )
        self.rounds = rounds
        self.previous = dict(previous)
        self.last = dict(last)


class VerificationError(SimulationError):
    """An embedded assertion of an experiment or verification run failed"""
    def __init__(self, message: str = "Verification failed", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, ErrorCategory.VERIFICATION, details)


class ReportIOError(SimulationError):
    """Output file could not be written"""
    def __init__(self, message: str = "Output error", details: Optional[Dict[str, Any]] = None):
        super().__init__(message, ErrorCategory.IO, details)


class ErrorAggregator:
    """Aggregate errors raised by sweep cells for the run report"""

    def __init__(self) -> None:
        self.errors: List[Tuple[str, SimulationError]] = []

    def add_error(self, cell: str, error: BaseException) -> None:
        if not isinstance(error, SimulationError):
            error = SimulationError(f"{type(error).__name__}: {error}")
        self.errors.append((cell, error))
        logger.warning("cell failed", cell=cell, category=error.category.value, error=str(error))

    def __len__(self) -> int:
        return len(self.errors)

    def get_error_summary(self) -> Dict[str, Any]:
        """Summary of errors by category, ordered by cell name"""
        ordered = sorted(self.errors, key=lambda item: item[0])
        by_category: Dict[str, int] = {}
        for _, error in ordered:
            by_category[error.category.value] = by_category.get(error.category.value, 0) + 1

        return {
            "total": len(ordered),
            "by_category": dict(sorted(by_category.items())),
            "recent_errors": [
                {"cell": cell, "category": error.category.value, "message": str(error)}
                for cell, error in ordered[-10:]
            ],
        }

    def first(self) -> Optional[SimulationError]:
        """The error of the lexicographically first failing cell."""
        if not self.errors:
            return None
        return min(self.errors, key=lambda item: item[0])[1]
