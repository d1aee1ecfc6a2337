from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

from ..bandpower import DEFAULT_BANDS, BandSet, PsdParams
from ..forest import ForestParams

FEATURE_SETS = ("TSG", "BF", "TSG+BF")

# zero-based positions of channels 3,4,5,6,7,8,13,14,18,19 of the 19-channel montage
DEFAULT_SUBSET_CHANNELS = (2, 3, 4, 5, 6, 7, 12, 13, 17, 18)

DEFAULT_FINETUNE_GRID = tuple(round(0.05 * i, 2) for i in range(17))


@dataclass(frozen=True)
class PipelineConfig:
    high_pass_hz: float = 0.5
    low_pass_hz: float = 30.0
    window_seconds: float = 2.5
    overlap_seconds: float = 0.0
    band_set: BandSet = DEFAULT_BANDS
    psd: PsdParams = field(default_factory=PsdParams)


@dataclass(frozen=True)
class ExperimentConfig:
    feature_sets: tuple[str, ...] = FEATURE_SETS
    fractions: tuple[float, ...] = (0.1, 0.2, 0.4, 0.6, 0.8)
    ratios: tuple[float, ...] = (0.125, 0.25, 0.5, 0.75, 1.0)
    splits: int = 45
    seed: int = 0
    querying_fraction: float = 0.8
    finetune_fractions: tuple[float, ...] = DEFAULT_FINETUNE_GRID
    transfer_mode: str = "subject"
    channels: Optional[tuple[int, ...]] = None
    subset_splits: int = 30
    subset_fraction: float = 0.8
    importance_sizes: tuple[int, ...] = (4, 6, 8)
    block_split: bool = False
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    forest: ForestParams = field(default_factory=ForestParams)

    def __post_init__(self):
        for fs in self.feature_sets:
            if fs not in FEATURE_SETS:
                raise ValueError(f"unknown feature set {fs!r}; choose from {FEATURE_SETS}")
        for p in self.fractions:
            if not 0 < p < 1:
                raise ValueError(f"training fractions must lie in (0, 1), got {p}")
        for r in self.ratios:
            if not 0 < r <= 1:
                raise ValueError(f"labeled ratios must lie in (0, 1], got {r}")
        for q in self.finetune_fractions:
            if not 0 <= q < 1:
                raise ValueError(f"fine-tuning fractions must lie in [0, 1), got {q}")
        if self.splits < 1 or self.subset_splits < 1:
            raise ValueError("split counts must be at least 1")
        if not 0 < self.querying_fraction < 1 or not 0 < self.subset_fraction < 1:
            raise ValueError("querying/subset fractions must lie in (0, 1)")
        if self.transfer_mode not in ("subject", "session"):
            raise ValueError(f"transfer_mode must be 'subject' or 'session', got {self.transfer_mode!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pipeline"]["band_set"] = [[b.name, b.low, b.high] for b in self.pipeline.band_set.bands]
        return d

    def hash(self) -> str:
        return config_hash(self.to_dict())


def config_hash(mapping) -> str:
    blob = json.dumps(mapping, sort_keys=True, separators=(",", ":"), default=list)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
