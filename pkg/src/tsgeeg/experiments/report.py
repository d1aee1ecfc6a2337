from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

CSV_COLUMNS = ("feature_set", "experiment", "subject", "setting", "n_seeds", "mean", "stderr")
ALL_SUBJECTS = "ALL"


@dataclass(frozen=True)
class Cell:
    """One subject's score for one (feature set, setting)."""

    feature_set: str
    subject: str
    setting: str
    value: float  # mean over seeds
    n_seeds: int
    stderr: float = math.nan  # across seeds
    seeds: tuple[int, ...] = ()


def standard_error(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return math.nan
    return float(np.std(v, ddof=1) / np.sqrt(v.size))


def cell_from_scores(feature_set: str, subject: str, setting: str, scores, seeds=()) -> Cell:
    scores = np.asarray(scores, dtype=np.float64)
    return Cell(feature_set, subject, setting, float(scores.mean()), int(scores.size),
                standard_error(scores), tuple(int(s) for s in seeds))


@dataclass
class Report:
    experiment: str
    cells: list[Cell] = field(default_factory=list)
    config_hash: str = ""
    metric: str = "balanced_accuracy"
    extra: dict = field(default_factory=dict)

    def settings(self) -> list[str]:
        return list(dict.fromkeys(c.setting for c in self.cells))

    def feature_sets(self) -> list[str]:
        return list(dict.fromkeys(c.feature_set for c in self.cells))

    def subjects(self) -> list[str]:
        return list(dict.fromkeys(c.subject for c in self.cells))

    def cell(self, feature_set: str, subject: str, setting: str) -> Cell:
        for c in self.cells:
            if (c.feature_set, c.subject, c.setting) == (feature_set, subject, setting):
                return c
        raise KeyError((feature_set, subject, setting))

    def subject_values(self, feature_set: str, setting: str) -> np.ndarray:
        return np.array([c.value for c in self.cells if c.feature_set == feature_set and c.setting == setting])

    def summary(self, feature_set: str, setting: str) -> tuple[float, float]:
        """Mean across subjects and its standard error (sample std / sqrt(n))."""
        v = self.subject_values(feature_set, setting)
        if v.size == 0:
            raise KeyError((feature_set, setting))
        return float(v.mean()), standard_error(v)

    def rows(self) -> list[tuple]:
        rows = []
        for fs in self.feature_sets():
            for setting in self.settings():
                cells = [c for c in self.cells if c.feature_set == fs and c.setting == setting]
                if not cells:
                    continue
                for c in cells:
                    rows.append((fs, self.experiment, c.subject, setting, c.n_seeds, c.value, c.stderr))
                mean, se = self.summary(fs, setting)
                rows.append((fs, self.experiment, ALL_SUBJECTS, setting, cells[0].n_seeds, mean, se))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# config_hash={self.config_hash} metric={self.metric}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for fs, exp, subj, setting, n, mean, se in self.rows():
            w.writerow([fs, exp, subj, setting, n, _fmt(mean), _fmt(se)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "metric": self.metric,
            "summary": [
                {"feature_set": fs, "setting": s, "mean": m, "stderr": _json_num(se)}
                for fs in self.feature_sets()
                for s in self.settings()
                if self.subject_values(fs, s).size
                for m, se in [self.summary(fs, s)]
            ],
            "cells": [
                {
                    "feature_set": c.feature_set,
                    "subject": c.subject,
                    "setting": c.setting,
                    "mean": c.value,
                    "n_seeds": c.n_seeds,
                    "stderr": _json_num(c.stderr),
                    "seeds": list(c.seeds),
                }
                for c in self.cells
            ],
            "extra": self.extra,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Report":
        cells = [
            Cell(c["feature_set"], c["subject"], c["setting"], float(c["mean"]), int(c["n_seeds"]),
                 math.nan if c["stderr"] is None else float(c["stderr"]), tuple(c.get("seeds", ())))
            for c in data["cells"]
        ]
        return cls(data["experiment"], cells, data.get("config_hash", ""), data.get("metric", "balanced_accuracy"),
                   data.get("extra", {}))

    def plot_rows(self) -> list[tuple]:
        """(feature_set, x, y, y_low, y_high) with a one-standard-error band."""
        out = []
        for fs in self.feature_sets():
            for s in self.settings():
                if not self.subject_values(fs, s).size:
                    continue
                m, se = self.summary(fs, s)
                se = 0.0 if math.isnan(se) else se
                out.append((fs, s, m, m - se, m + se))
        return out


def _fmt(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.6f}"


def _json_num(x: Optional[float]):
    return None if x is None or math.isnan(x) else x


def plot_csv(rows, config_hash: str, columns=("feature_set", "x", "y", "y_low", "y_high")) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _fmt(float(v)) for v in row])
    return buf.getvalue()


def dump_json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True)
