"""In-session, non-constant querying and transfer protocols.

Random streams are keyed by ``(config seed, subject key, split index,
purpose)`` so that the same split of the same subject is drawn
identically by every protocol, whatever else each protocol samples.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..bandpower import BfModel, apply_bf, fit_bf
from ..forest import ForestError, ForestParams, accuracy, balanced_accuracy, fine_tune, predict, train
from ..graphcore import DegenerateInputError, TsgModel, fit_tsg_graphs, oos_embed_graphs
from .config import ExperimentConfig
from .data import SubjectData, stable_key
from .report import Cell, Report, cell_from_scores

log = logging.getLogger(__name__)

SPLIT, LABEL, FOREST, FINETUNE = 0, 1, 2, 3
MIN_TRAIN_PER_CLASS = 2
MAX_LABEL_ATTEMPTS = 100

METRICS: dict[str, Callable] = {"balanced_accuracy": balanced_accuracy, "accuracy": accuracy}

_FIT_ERRORS = (DegenerateInputError, ForestError, np.linalg.LinAlgError)


class SplitError(ValueError):
    pass


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def split_seed(seed: int, subject_key: int, split: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(subject_key), int(split)]).generate_state(1)[0])


def forest_seed(seed: int, subject_key: int, split: int) -> int:
    return int(rng_for(seed, subject_key, split, FOREST).integers(0, 2**31 - 1))


def _n_train(p: float, n: int, minimum: int) -> int:
    k = int(np.floor(p * n + 0.5))
    return min(max(k, minimum), n - 1)


def stratified_split(labels: np.ndarray, p: float, rng: np.random.Generator, block: bool = False,
                     minimum: int = MIN_TRAIN_PER_CLASS) -> tuple[np.ndarray, np.ndarray]:
    """Class-stratified random split; each class keeps at least ``minimum``
    training windows and at least one test window.

    With ``block=True`` each class's test windows form one contiguous
    (cyclic) run at a random offset instead of a uniform draw.
    """
    labels = np.asarray(labels)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        n = idx.size
        if n < minimum + 1:
            raise SplitError(f"class {c!r} has {n} windows; need at least {minimum + 1}")
        k = _n_train(p, n, minimum)
        if block:
            start = int(rng.integers(0, n))
            held = (start + np.arange(n - k)) % n
            mask = np.ones(n, dtype=bool)
            mask[held] = False
            train.append(idx[mask])
            test.append(idx[~mask])
        else:
            perm = rng.permutation(n)
            train.append(idx[perm[:k]])
            test.append(idx[perm[k:]])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


# --------------------------------------------------------------------------- features


@dataclass(frozen=True)
class FeatureMaps:
    tsg: Optional[TsgModel]
    bf: Optional[BfModel]
    channels: Optional[tuple[int, ...]]


def _graphs(data: SubjectData, idx, channels) -> np.ndarray:
    g = data.graphs[idx]
    if channels is not None:
        ch = np.asarray(channels)
        g = g[:, ch][:, :, ch]
    return g


def _band_rows(data: SubjectData, idx, channels) -> np.ndarray:
    b = data.bands[idx]
    if channels is not None:
        b = b[:, np.asarray(channels)]
    return b.reshape(b.shape[0], -1)


def fit_feature_maps(data: SubjectData, idx, feature_sets: Sequence[str],
                     channels: Optional[Sequence[int]] = None) -> tuple[FeatureMaps, dict[str, np.ndarray]]:
    """Fit the needed feature maps on windows ``idx``; also return their in-sample features."""
    ch = None if channels is None else tuple(int(c) for c in channels)
    tsg = bf = None
    blocks = {}
    if any("TSG" in fs for fs in feature_sets):
        tsg = fit_tsg_graphs(_graphs(data, idx, ch))
        blocks["TSG"] = np.asarray(tsg.embedding)
    if any("BF" in fs for fs in feature_sets):
        rows = _band_rows(data, idx, ch)
        bf = fit_bf(rows)
        blocks["BF"] = apply_bf(bf, rows)
    return FeatureMaps(tsg, bf, ch), _assemble(blocks, feature_sets)


def transform(maps: FeatureMaps, data: SubjectData, idx, feature_sets: Sequence[str]) -> dict[str, np.ndarray]:
    """Map windows ``idx`` of ``data`` through already fitted feature maps."""
    blocks = {}
    if maps.tsg is not None:
        blocks["TSG"] = oos_embed_graphs(maps.tsg, _graphs(data, idx, maps.channels))
    if maps.bf is not None:
        blocks["BF"] = apply_bf(maps.bf, _band_rows(data, idx, maps.channels))
    return _assemble(blocks, feature_sets)


def _assemble(blocks: dict[str, np.ndarray], feature_sets: Sequence[str]) -> dict[str, np.ndarray]:
    out = {}
    for fs in feature_sets:
        if fs == "TSG+BF":
            out[fs] = np.hstack([blocks["TSG"], blocks["BF"]])
        else:
            out[fs] = blocks[fs]
    return out


def _train_and_score(train_x, y_train, test_x, y_test, feature_sets, params, seed, metric):
    score = METRICS[metric]
    out = {}
    for fs in feature_sets:
        forest = train(train_x[fs], y_train, params, seed)
        out[fs] = score(y_test, predict(forest, test_x[fs]))
    return out


def score_split(data: SubjectData, train_idx, test_idx, feature_sets: Sequence[str], params: ForestParams,
                seed: int, metric: str = "balanced_accuracy", channels=None) -> dict[str, float]:
    """Fit feature maps and forests on ``train_idx``; score each feature set on ``test_idx``."""
    maps, train_x = fit_feature_maps(data, train_idx, feature_sets, channels)
    test_x = transform(maps, data, test_idx, feature_sets)
    return _train_and_score(train_x, data.labels[train_idx], test_x, data.labels[test_idx],
                            feature_sets, params, seed, metric)


# --------------------------------------------------------------------------- parallel helpers


def parallel_map(fn, items, jobs: int = 1):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _has_both_classes(data: SubjectData) -> bool:
    return np.unique(data.labels).size == 2


def usable_subjects(subjects: Sequence[SubjectData]) -> list[SubjectData]:
    out = []
    for s in subjects:
        if _has_both_classes(s):
            out.append(s)
        else:
            warnings.warn(f"subject {s.subject!r} has single-class data; excluded", RuntimeWarning)
    return out


def fraction_label(prefix: str, x: float) -> str:
    return f"{prefix}={x:g}"


# --------------------------------------------------------------------------- in-session


def _in_session_subject(args) -> list[Cell]:
    data, cfg, fractions, splits, metric, channels = args
    key = data.key
    cells = []
    for p in fractions:
        scores = {fs: [] for fs in cfg.feature_sets}
        seeds = []
        for i in range(splits):
            rng = rng_for(cfg.seed, key, i, SPLIT)
            try:
                tr, te = stratified_split(data.labels, p, rng, cfg.block_split)
                res = score_split(data, tr, te, cfg.feature_sets, cfg.forest, forest_seed(cfg.seed, key, i),
                                  metric, channels)
            except (SplitError, *_FIT_ERRORS) as exc:
                warnings.warn(f"subject {data.subject} p={p} split {i} skipped: {exc}", RuntimeWarning)
                continue
            seeds.append(split_seed(cfg.seed, key, i))
            for fs, v in res.items():
                scores[fs].append(v)
        if seeds:
            for fs in cfg.feature_sets:
                cells.append(cell_from_scores(fs, data.subject, fraction_label("p", p), scores[fs], seeds))
    return cells


def run_in_session(cfg: ExperimentConfig, subjects: Sequence[SubjectData], jobs: int = 1,
                   metric: str = "balanced_accuracy", fractions: Optional[Sequence[float]] = None,
                   splits: Optional[int] = None, channels: Optional[Sequence[int]] = None) -> Report:
    """Per subject: fit features and forest on a fraction ``p`` of its windows,
    score on the rest, averaged over random splits."""
    fractions = tuple(cfg.fractions if fractions is None else fractions)
    splits = cfg.splits if splits is None else splits
    subs = usable_subjects(subjects)
    jobs_args = [(s, cfg, fractions, splits, metric, channels) for s in subs]
    cells = [c for chunk in parallel_map(_in_session_subject, jobs_args, jobs) for c in chunk]
    report = Report("in-session", cells, cfg.hash(), metric)
    hist_p = 0.8 if 0.8 in fractions else fractions[-1]
    report.extra["histogram"] = {
        "setting": fraction_label("p", hist_p),
        "subject_means": {fs: report.subject_values(fs, fraction_label("p", hist_p)).tolist()
                          for fs in cfg.feature_sets},
    }
    return report


# --------------------------------------------------------------------------- non-constant querying


def labeled_subset(y_train: np.ndarray, ratio: float, rng: np.random.Generator) -> Optional[np.ndarray]:
    """Positions (into the training set) of the labeled windows, in training order.

    Redraws up to ``MAX_LABEL_ATTEMPTS`` times when a draw holds a single
    class; returns ``None`` if every attempt does.
    """
    n = y_train.size
    if ratio >= 1.0:
        return np.arange(n)
    m = min(max(int(np.floor(ratio * n + 0.5)), 2), n)
    for _ in range(MAX_LABEL_ATTEMPTS):
        pos = np.sort(rng.choice(n, size=m, replace=False))
        if np.unique(y_train[pos]).size == 2:
            return pos
    return None


def _querying_subject(args) -> list[Cell]:
    data, cfg = args
    key = data.key
    scores = {(fs, r): [] for fs in cfg.feature_sets for r in cfg.ratios}
    seeds = {r: [] for r in cfg.ratios}
    for i in range(cfg.splits):
        rng = rng_for(cfg.seed, key, i, SPLIT)
        try:
            tr, te = stratified_split(data.labels, cfg.querying_fraction, rng, cfg.block_split)
            maps, train_x = fit_feature_maps(data, tr, cfg.feature_sets)
            test_x = transform(maps, data, te, cfg.feature_sets)
        except (SplitError, *_FIT_ERRORS) as exc:
            warnings.warn(f"subject {data.subject} split {i} skipped: {exc}", RuntimeWarning)
            continue
        y_tr, y_te = data.labels[tr], data.labels[te]
        for r_idx, r in enumerate(cfg.ratios):
            pos = labeled_subset(y_tr, r, rng_for(cfg.seed, key, i, LABEL, r_idx))
            if pos is None:
                warnings.warn(f"subject {data.subject} r={r} split {i}: no two-class labeled subset", RuntimeWarning)
                continue
            try:
                res = _train_and_score({fs: x[pos] for fs, x in train_x.items()}, y_tr[pos], test_x, y_te,
                                       cfg.feature_sets, cfg.forest, forest_seed(cfg.seed, key, i),
                                       "balanced_accuracy")
            except _FIT_ERRORS as exc:
                warnings.warn(f"subject {data.subject} r={r} split {i} skipped: {exc}", RuntimeWarning)
                continue
            seeds[r].append(split_seed(cfg.seed, key, i))
            for fs, v in res.items():
                scores[(fs, r)].append(v)
    cells = []
    for r in cfg.ratios:
        if seeds[r]:
            for fs in cfg.feature_sets:
                cells.append(cell_from_scores(fs, data.subject, fraction_label("r", r), scores[(fs, r)], seeds[r]))
    return cells


def run_nonconstant_querying(cfg: ExperimentConfig, subjects: Sequence[SubjectData], jobs: int = 1) -> Report:
    """Fixed train/test split; features use every training window, the forest
    only a labeled fraction ``r`` of them."""
    subs = usable_subjects(subjects)
    cells = [c for chunk in parallel_map(_querying_subject, [(s, cfg) for s in subs], jobs) for c in chunk]
    return Report("querying", cells, cfg.hash(), "balanced_accuracy")


# --------------------------------------------------------------------------- transfer


@dataclass(frozen=True)
class Unit:
    data: SubjectData  # windows of one (subject, session)
    subject: str
    session: str

    @property
    def key(self) -> int:
        return stable_key(f"{self.subject}/{self.session}")


def transfer_units(subjects: Sequence[SubjectData]) -> list[Unit]:
    units = []
    for s in subjects:
        for sess in s.units():
            part = s.take(np.flatnonzero(s.sessions == sess))
            if _has_both_classes(part):
                units.append(Unit(part, s.subject, sess))
            else:
                warnings.warn(f"{s.subject}/{sess} has single-class data; excluded from transfer", RuntimeWarning)
    return units


def transfer_pairs(units: Sequence[Unit], mode: str) -> list[tuple[int, int]]:
    pairs = []
    for i, a in enumerate(units):
        for j, b in enumerate(units):
            if i == j:
                continue
            same_subject = a.subject == b.subject
            if (mode == "session" and same_subject) or (mode == "subject" and not same_subject):
                pairs.append((i, j))
    return pairs


def finetune_split(labels: np.ndarray, q: float, rng: np.random.Generator):
    """Stratified (fine-tune, evaluation) positions for fraction ``q`` of a target."""
    return stratified_split(labels, q, rng, minimum=1)


def _transfer_source(args):
    src, targets, cfg = args
    maps, train_x = fit_feature_maps(src.data, np.arange(len(src.data)), cfg.feature_sets)
    target_x = {t.key: transform(maps, t.data, np.arange(len(t.data)), cfg.feature_sets) for t in targets}
    out = {}  # (fs, target key, q) -> list of scores over splits
    for i in range(cfg.splits):
        seed = forest_seed(cfg.seed, src.key, i)
        forests = {fs: train(train_x[fs], src.data.labels, cfg.forest, seed) for fs in cfg.feature_sets}
        for t in targets:
            y = t.data.labels
            for q_idx, q in enumerate(cfg.finetune_fractions):
                if q == 0:
                    ft_pos, ev_pos = np.array([], dtype=int), np.arange(y.size)
                else:
                    try:
                        ft_pos, ev_pos = finetune_split(y, q, rng_for(cfg.seed, src.key, t.key, i, FINETUNE, q_idx))
                    except SplitError as exc:
                        warnings.warn(f"target {t.subject}/{t.session} q={q}: {exc}", RuntimeWarning)
                        continue
                for fs in cfg.feature_sets:
                    x = target_x[t.key][fs]
                    f = forests[fs] if q == 0 else fine_tune(forests[fs], x[ft_pos], y[ft_pos])
                    score = balanced_accuracy(y[ev_pos], predict(f, x[ev_pos]))
                    out.setdefault((fs, t.key, q), []).append(score)
    return src.key, out


def run_transfer(cfg: ExperimentConfig, subjects: Sequence[SubjectData], jobs: int = 1,
                 mode: Optional[str] = None) -> Report:
    """Zero-shot (q = 0) and leaf-posterior fine-tuned (q > 0) transfer.

    ``mode="session"`` transfers between sessions of one subject;
    ``mode="subject"`` between (subject, session) units of different
    subjects and additionally reports, per target subject, the minimum and
    maximum over sources.
    """
    mode = mode or cfg.transfer_mode
    units = transfer_units(subjects)
    pairs = transfer_pairs(units, mode)
    if not pairs:
        raise ValueError(f"no source/target pairs for {mode}-transfer (need 2+ {'sessions' if mode == 'session' else 'subjects'})")
    by_source: dict[int, list[int]] = {}
    for i, j in pairs:
        by_source.setdefault(i, []).append(j)
    args = [(units[i], [units[j] for j in tgts], cfg) for i, tgts in by_source.items()]
    results = dict(parallel_map(_transfer_source, args, jobs))

    cells: list[Cell] = []
    subjects_order = list(dict.fromkeys(u.subject for u in units))
    for subject in subjects_order:
        tgt_units = [u for u in units if u.subject == subject]
        for q in cfg.finetune_fractions:
            setting = fraction_label("q", q)
            for fs in cfg.feature_sets:
                per_source: dict[str, list[float]] = {}
                for t in tgt_units:
                    for i, j in pairs:
                        if units[j] is not t:
                            continue
                        vals = results[units[i].key].get((fs, t.key, q))
                        if vals:
                            per_source.setdefault(f"{units[i].subject}/{units[i].session}", []).extend(vals)
                if not per_source:
                    continue
                if mode == "session":
                    all_vals = [v for vals in per_source.values() for v in vals]
                    cells.append(cell_from_scores(fs, subject, setting, all_vals))
                else:
                    means = np.array([np.mean(v) for v in per_source.values()])
                    cells.append(cell_from_scores(fs, subject, setting, means))
                    cells.append(Cell(fs, subject, setting + "|min", float(means.min()), len(means)))
                    cells.append(Cell(fs, subject, setting + "|max", float(means.max()), len(means)))
    report = Report(f"transfer-{mode}", cells, cfg.hash(), "balanced_accuracy")
    report.extra["n_sources_per_target"] = {
        s: len({i for i, j in pairs if units[j].subject == s}) for s in subjects_order
    }
    return report
