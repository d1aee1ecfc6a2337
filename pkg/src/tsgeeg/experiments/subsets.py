"""Exhaustive channel-subset search and channel/pair importance rankings.

Every nonempty subset of the configured channels reruns the in-session
protocol with standard accuracy. The train/test splits and forest seeds
are the ones ``run_in_session`` would draw, so the full subset reproduces
an in-session run restricted to the same channels.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .config import DEFAULT_SUBSET_CHANNELS, ExperimentConfig
from .data import SubjectData
from .protocols import (_FIT_ERRORS, SPLIT, SplitError, forest_seed, parallel_map, rng_for, score_split,
                        split_seed, stratified_split, usable_subjects)
from .report import Cell, Report, standard_error

log = logging.getLogger(__name__)

MAX_SUBSET_CHANNELS = 12


@dataclass
class SubsetReport:
    channels: tuple[int, ...]  # searched channel indices into the recordings
    channel_names: tuple[str, ...]
    subsets: list[tuple[int, ...]]  # each a sorted tuple drawn from ``channels``
    subjects: list[str]
    scores: dict[str, np.ndarray]  # feature set -> (n_subjects, n_subsets); nan where skipped
    config_hash: str = ""
    seeds: dict[str, list[int]] = field(default_factory=dict)  # subject -> split seeds

    def mean_scores(self, feature_set: str) -> np.ndarray:
        """Per-subset accuracy averaged over subjects (nan for skipped subsets)."""
        s = self.scores[feature_set]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.nanmean(s, axis=0) if s.shape[0] else np.full(s.shape[1], np.nan)

    def table(self, feature_set: str) -> list[tuple[tuple[int, ...], float]]:
        """(subset, mean accuracy) for every evaluated subset."""
        m = self.mean_scores(feature_set)
        return [(sub, float(v)) for sub, v in zip(self.subsets, m) if not np.isnan(v)]

    def size_summary(self, feature_set: str) -> list[tuple[int, int, float, float, float]]:
        """(size, n_subsets, mean, 5th percentile, 95th percentile) per subset size."""
        rows = []
        by_size: dict[int, list[float]] = {}
        for sub, v in self.table(feature_set):
            by_size.setdefault(len(sub), []).append(v)
        for k in sorted(by_size):
            v = np.asarray(by_size[k])
            rows.append((k, v.size, float(v.mean()), float(np.percentile(v, 5)), float(np.percentile(v, 95))))
        return rows

    def to_report(self) -> Report:
        cells = []
        for fs, mat in self.scores.items():
            for si, sub in enumerate(self.subsets):
                setting = "ch=" + "-".join(str(c) for c in sub)
                for j, subject in enumerate(self.subjects):
                    if not np.isnan(mat[j, si]):
                        seeds = self.seeds.get(subject, [])
                        cells.append(Cell(fs, subject, setting, float(mat[j, si]), len(seeds), seeds=tuple(seeds)))
        return Report("subsets", cells, self.config_hash, "accuracy")

    def to_json(self) -> dict:
        return {
            "channels": list(self.channels),
            "channel_names": list(self.channel_names),
            "subsets": [list(s) for s in self.subsets],
            "subjects": self.subjects,
            "scores": {fs: [[None if np.isnan(x) else float(x) for x in row] for row in m]
                       for fs, m in self.scores.items()},
            "size_summary": {fs: [list(r) for r in self.size_summary(fs)] for fs in self.scores},
            "seeds": self.seeds,
            "config_hash": self.config_hash,
        }

    @classmethod
    def from_json(cls, data: dict) -> "SubsetReport":
        scores = {fs: np.array([[np.nan if x is None else x for x in row] for row in m], dtype=np.float64)
                  .reshape(len(data["subjects"]), len(data["subsets"]))
                  for fs, m in data["scores"].items()}
        return cls(tuple(data["channels"]), tuple(data["channel_names"]), [tuple(s) for s in data["subsets"]],
                   list(data["subjects"]), scores, data.get("config_hash", ""), dict(data.get("seeds", {})))


def all_subsets(channels: Sequence[int]) -> list[tuple[int, ...]]:
    """Nonempty subsets ordered by size, then lexicographically."""
    ch = sorted(channels)
    return [c for k in range(1, len(ch) + 1) for c in itertools.combinations(ch, k)]


def default_channels(n_channels: int) -> tuple[int, ...]:
    if n_channels > max(DEFAULT_SUBSET_CHANNELS):
        return DEFAULT_SUBSET_CHANNELS
    return tuple(range(n_channels))


def _subject_sweep(args):
    data, cfg, subsets, feature_sets = args
    key = data.key
    splits = []
    for i in range(cfg.subset_splits):
        try:
            tr, te = stratified_split(data.labels, cfg.subset_fraction, rng_for(cfg.seed, key, i, SPLIT),
                                      cfg.block_split)
        except SplitError as exc:
            warnings.warn(f"subject {data.subject} split {i} skipped: {exc}", RuntimeWarning)
            continue
        splits.append((i, tr, te))
    out = {fs: np.full(len(subsets), np.nan) for fs in feature_sets}
    for si, sub in enumerate(subsets):
        usable = [fs for fs in feature_sets if not (len(sub) == 1 and "TSG" in fs)]
        if not usable:
            continue
        acc = {fs: [] for fs in usable}
        for i, tr, te in splits:
            try:
                res = score_split(data, tr, te, usable, cfg.forest, forest_seed(cfg.seed, key, i), "accuracy", sub)
            except _FIT_ERRORS as exc:
                warnings.warn(f"subject {data.subject} subset {sub} split {i} skipped: {exc}", RuntimeWarning)
                continue
            for fs in usable:
                acc[fs].append(res[fs])
        for fs in usable:
            if acc[fs]:
                out[fs][si] = float(np.mean(acc[fs]))
    seeds = [split_seed(cfg.seed, key, i) for i, _, _ in splits]
    return data.subject, out, seeds


def run_subset_search(cfg: ExperimentConfig, subjects: Sequence[SubjectData], jobs: int = 1,
                      channels: Optional[Sequence[int]] = None,
                      feature_sets: Optional[Sequence[str]] = None) -> SubsetReport:
    """Rerun the in-session protocol (standard accuracy) on every nonempty channel subset."""
    subs = usable_subjects(subjects)
    if not subs:
        raise ValueError("no subject with two-class data")
    n_c = subs[0].n_channels
    channels = tuple(channels if channels is not None else (cfg.channels or default_channels(n_c)))
    if len(channels) > MAX_SUBSET_CHANNELS:
        raise ValueError(f"{len(channels)} channels give 2^{len(channels)} - 1 subsets; at most "
                         f"{MAX_SUBSET_CHANNELS} channels are supported")
    if len(set(channels)) != len(channels) or min(channels) < 0 or max(channels) >= n_c:
        raise ValueError(f"channel indices must be distinct and within [0, {n_c})")
    feature_sets = tuple(feature_sets or cfg.feature_sets)
    subsets = all_subsets(channels)
    if any("TSG" in fs for fs in feature_sets):
        log.info("single-channel subsets skipped for TSG feature sets (1x1 correlation graph)")
    results = parallel_map(_subject_sweep, [(s, cfg, subsets, feature_sets) for s in subs], jobs)
    scores = {fs: np.array([r[1][fs] for r in results]) for fs in feature_sets}
    return SubsetReport(channels, tuple(subs[0].channel_names[c] for c in sorted(channels)), subsets,
                        [r[0] for r in results], scores, cfg.hash(), {r[0]: r[2] for r in results})


# --------------------------------------------------------------------------- importance


@dataclass(frozen=True)
class Importance:
    channel_scores: dict[int, float]
    channel_ranks: dict[int, int]
    pair_scores: dict[tuple[int, int], float]
    pair_ranks: dict[tuple[int, int], int]

    def ranked_channels(self) -> list[int]:
        return sorted(self.channel_ranks, key=lambda c: (self.channel_ranks[c], c))

    def ranked_pairs(self) -> list[tuple[int, int]]:
        return sorted(self.pair_ranks, key=lambda p: (self.pair_ranks[p], p))


def dense_ranks(scores: dict) -> dict:
    """Rank 1 for the highest score; equal scores share a rank, no gaps."""
    levels = sorted(set(scores.values()), reverse=True)
    pos = {v: i + 1 for i, v in enumerate(levels)}
    return {k: pos[v] for k, v in scores.items()}


def channel_importance(sr: SubsetReport, feature_set: str,
                       sizes: Optional[Sequence[int]] = None) -> Importance:
    """Mean accuracy over the subsets containing each channel (and each pair), with dense ranks.

    ``sizes`` restricts the subsets considered to those sizes.
    """
    if len(sr.channels) < 2:
        raise ValueError("importance needs a search over at least 2 channels")
    rows = [(set(sub), v) for sub, v in sr.table(feature_set) if sizes is None or len(sub) in sizes]
    ch_scores = {}
    for c in sorted(sr.channels):
        vals = [v for sub, v in rows if c in sub]
        if not vals:
            warnings.warn(f"channel {c} appears in no evaluated subset; excluded", RuntimeWarning)
            continue
        ch_scores[c] = float(np.mean(vals))
    pair_scores = {}
    for a, b in itertools.combinations(sorted(sr.channels), 2):
        vals = [v for sub, v in rows if a in sub and b in sub]
        if vals:
            pair_scores[(a, b)] = float(np.mean(vals))
    return Importance(ch_scores, dense_ranks(ch_scores), pair_scores, dense_ranks(pair_scores))


def size_summary_rows(sr: SubsetReport) -> list[tuple]:
    """Plot rows (feature_set, size, mean, p5, p95) across feature sets."""
    return [(fs, k, m, lo, hi) for fs in sr.scores for k, _, m, lo, hi in sr.size_summary(fs)]


def subject_spread(sr: SubsetReport, feature_set: str) -> np.ndarray:
    """Standard error across subjects for every subset."""
    return np.array([standard_error(col[~np.isnan(col)]) for col in sr.scores[feature_set].T])
