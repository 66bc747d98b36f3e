"""Run configuration for simulations and experiment sweeps.

Values resolve in this order (later wins): field defaults, environment /
``.env`` (prefix ``GEOCAST_``), JSON config file, command-line flags.
"""

from __future__ import annotations

import hashlib
import json
import os
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str(self.value)

        def __format__(self, format_spec: str) -> str:
            return str(self.value).__format__(format_spec)

        @staticmethod
        def _generate_next_value_(name, start, count, last_values):
            return name.lower()
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from geocast.error_handling import UsageError

__all__ = [
    "DistanceKind",
    "ExperimentId",
    "HyperplaneFamily",
    "InsertionMode",
    "KnowledgeMode",
    "Preset",
    "PreferredRule",
    "RunConfig",
    "StrategyKind",
    "UpdateOrder",
    "ValidationError",
    "derive_seed",
]


class StrategyKind(StrEnum):
    EMPTY_RECT = "empty-rect"
    ORTHO_HP = "ortho-hp"
    GEN_HP = "gen-hp"
    K_CLOSEST = "k-closest"


class KnowledgeMode(StrEnum):
    GOSSIP = "gossip"
    FULL = "full"


class InsertionMode(StrEnum):
    INCREMENTAL = "incremental"
    BATCH = "batch"


class DistanceKind(StrEnum):
    L1 = "l1"
    L2 = "l2"


class UpdateOrder(StrEnum):
    SYNCHRONOUS = "synchronous"
    SEQUENTIAL = "sequential"


class ExperimentId(StrEnum):
    FIG1AB = "fig1ab"
    FIG1C = "fig1c"
    FIG1DE = "fig1de"
    CHURN = "churn"


class PreferredRule(StrEnum):
    MAX_LIFETIME = "max-lifetime"
    MIN_LIFETIME_ABOVE = "min-lifetime-above"
    NEAREST = "nearest"


class HyperplaneFamily(StrEnum):
    ORTHOGONAL = "orthogonal"
    SIGNED = "signed"


class Preset(StrEnum):
    STANDARD = "standard"
    REDUCED = "reduced"


def _default_jobs() -> int:
    return os.cpu_count() or 1


class RunConfig(BaseSettings):
    """One experiment's parameters"""

    model_config = SettingsConfigDict(
        env_prefix="GEOCAST_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        use_enum_values=False,
    )

    experiment: Optional[ExperimentId] = None
    seed: int = Field(0, ge=0)
    n: int = Field(1000, ge=1)
    d: int = Field(2, ge=1, le=16)
    vmax: float = Field(1000.0, gt=0)
    br: int = Field(2, ge=2)
    freshness_rounds: int = Field(2, ge=1)
    k: int = Field(1, ge=1)
    strategy: StrategyKind = StrategyKind.EMPTY_RECT
    knowledge_mode: KnowledgeMode = KnowledgeMode.FULL
    insertion: InsertionMode = InsertionMode.BATCH
    time_coord_index: int = Field(1, ge=1)
    distance: DistanceKind = DistanceKind.L1
    max_rounds: Optional[int] = Field(None, ge=1)
    update_order: UpdateOrder = UpdateOrder.SYNCHRONOUS
    hyperplanes: HyperplaneFamily = HyperplaneFamily.SIGNED
    preferred_rule: PreferredRule = PreferredRule.MAX_LIFETIME

    # sweep control
    seeds: int = Field(10, ge=1)
    preset: Preset = Preset.STANDARD
    sweep_n: Optional[List[int]] = None
    sweep_d: Optional[List[int]] = None
    sweep_k: Optional[List[int]] = None
    root_sample: Optional[int] = Field(None, ge=1)
    root: int = Field(0, ge=0)
    allow_large: bool = False
    jobs: int = Field(default_factory=_default_jobs, ge=1)
    include_timings: bool = False

    @model_validator(mode="after")
    def _check_ranges(self) -> RunConfig:
        if self.time_coord_index > self.d:
            raise ValueError(f"time_coord_index {self.time_coord_index} exceeds d={self.d}")
        for name in ("sweep_n", "sweep_d", "sweep_k"):
            values = getattr(self, name)
            if values is not None and (not values or min(values) < 1):
                raise ValueError(f"{name} must be a non-empty list of positive integers")
        if self.sweep_d is not None and max(self.sweep_d) > 16:
            raise ValueError("sweep_d values must be <= 16")
        return self

    def resolved_max_rounds(self, n: Optional[int] = None) -> int:
        return self.max_rounds if self.max_rounds is not None else 10 * max(n or self.n, 1)

    def echo(self) -> Dict[str, Any]:
        """Config as plain JSON values, excluding scheduling-only fields."""
        data = self.model_dump(mode="json", exclude={"jobs"})
        return dict(sorted(data.items()))

    @classmethod
    def from_sources(
        cls,
        config_path: Optional[Path] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> RunConfig:
        """Merge a JSON config file with flag overrides; flags win."""
        values: Dict[str, Any] = {}
        if config_path is not None:
            values.update(load_config_file(config_path))
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        unknown = sorted(set(values) - set(cls.model_fields))
        if unknown:
            raise UsageError(f"Unknown configuration keys: {', '.join(unknown)}", {"keys": unknown})
        return cls(**values)


def load_config_file(path: Path) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"Cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"Config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"Config file {path} must hold a flat JSON object")
    # kebab-case keys are accepted so config files can mirror flag names
    return {str(key).replace("-", "_"): value for key, value in data.items()}


def derive_seed(master_seed: int, experiment: str, **cell: Any) -> int:
    """Per-cell seed from the master seed and the cell parameters."""
    parts: List[Tuple[str, str]] = sorted((str(k), str(v)) for k, v in cell.items())
    key = "|".join([str(experiment), f"master={master_seed}"] + [f"{k}={v}" for k, v in parts])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") & ((1 << 63) - 1)
