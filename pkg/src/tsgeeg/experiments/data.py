"""Per-subject window tables shared by every protocol.

Correlation graphs and normalized band masses depend only on a window,
never on which windows end up in a training split, so they are computed
once per subject and sliced afterwards (including by channel subset).
"""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from ..bandpower import band_tensor
from ..graphcore import correlation_graphs
from ..signal import Recording, bandpass_filter, window_seconds
from .config import PipelineConfig


@dataclass(frozen=True)
class SubjectData:
    subject: str
    graphs: np.ndarray  # (n_w, n_c, n_c)
    bands: np.ndarray  # (n_w, n_c, I), rows on the simplex
    labels: np.ndarray  # (n_w,)
    sessions: np.ndarray  # (n_w,) session ids
    channel_names: tuple[str, ...]
    sample_rate: float

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def n_channels(self) -> int:
        return self.graphs.shape[1]

    @property
    def key(self) -> int:
        return stable_key(self.subject)

    def take(self, idx) -> "SubjectData":
        idx = np.asarray(idx)
        return SubjectData(self.subject, self.graphs[idx], self.bands[idx], self.labels[idx],
                           self.sessions[idx], self.channel_names, self.sample_rate)

    def units(self) -> list[str]:
        """Session ids in order of first appearance."""
        return list(dict.fromkeys(self.sessions.tolist()))


def stable_key(name: str) -> int:
    """Order-independent 32-bit key for seeding per-subject random streams."""
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "little")


def prepare_recording(rec: Recording, pipeline: PipelineConfig):
    filtered = bandpass_filter(rec, pipeline.high_pass_hz, pipeline.low_pass_hz)
    ws = window_seconds(filtered, pipeline.window_seconds, pipeline.overlap_seconds)
    graphs = correlation_graphs(ws.windows)
    bands = band_tensor(ws, rec.sample_rate, pipeline.band_set, pipeline.psd)
    return ws, graphs, bands


def prepare_subjects(recordings: Iterable[Recording], pipeline: PipelineConfig = PipelineConfig(),
                     channels: Optional[Sequence[int]] = None) -> list[SubjectData]:
    """Filter, window and featurize recordings, grouped by subject id.

    Subjects are returned sorted by id; within a subject windows keep
    recording order.
    """
    grouped: dict[str, list[Recording]] = defaultdict(list)
    for rec in recordings:
        if rec.meta.label is None:
            raise ValueError(f"recording {rec.meta.source or rec.meta.subject!r} has no class label")
        grouped[rec.meta.subject].append(rec)
    out = []
    for subject in sorted(grouped):
        recs = grouped[subject]
        names = recs[0].channel_names
        rate = recs[0].sample_rate
        for r in recs:
            if r.channel_names != names:
                raise ValueError(f"subject {subject!r}: recordings disagree on channels")
            if r.sample_rate != rate:
                raise ValueError(f"subject {subject!r}: recordings disagree on sample rate")
        g, b, y, s = [], [], [], []
        for rec in recs:
            if channels is not None:
                rec = rec.select_channels(channels)
            ws, graphs, bands = prepare_recording(rec, pipeline)
            g.append(graphs)
            b.append(bands)
            y.append(ws.labels)
            s.append(np.full(len(ws), rec.meta.session or "0", dtype=object))
        sel_names = names if channels is None else tuple(names[i] for i in channels)
        out.append(SubjectData(subject, np.concatenate(g), np.concatenate(b), np.concatenate(y),
                               np.concatenate(s), sel_names, rate))
    return out
