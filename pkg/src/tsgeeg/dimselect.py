"""Scree-plot elbow detection by profile likelihood (Zhu & Ghodsi, 2006)."""

from __future__ import annotations

import warnings

import numpy as np

VARIANCE_FLOOR = 1e-12


def profile_log_likelihood(values: np.ndarray) -> np.ndarray:
    """Profile log-likelihood of every split of a descending sequence.

    Entry ``q - 1`` scores the model where ``values[:q]`` and ``values[q:]``
    are two Gaussian groups with their own means and one pooled variance.
    """
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    out = np.empty(n - 1)
    dof = max(n - 2, 1)
    for q in range(1, n):
        head, tail = v[:q], v[q:]
        ss = np.sum((head - head.mean()) ** 2) + np.sum((tail - tail.mean()) ** 2)
        var = max(ss / dof, VARIANCE_FLOOR)
        resid = np.concatenate([head - head.mean(), tail - tail.mean()])
        out[q - 1] = -0.5 * n * np.log(2 * np.pi * var) - np.sum(resid**2) / (2 * var)
    return out


def _first_elbow(values: np.ndarray) -> int:
    # np.argmax returns the first maximizer, i.e. the smallest split
    return int(np.argmax(profile_log_likelihood(values))) + 1


def zhu_ghodsi(values, elbow_index: int = 2) -> int:
    """Dimension at the first or second elbow of a scree plot.

    Parameters
    ----------
    values : array_like
        Descending positive values (singular values), at least 3.
    elbow_index : {1, 2}
        The second elbow is found by rerunning the search on the values
        after the first elbow and adding the two split points.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 3:
        raise ValueError(f"need at least 3 values for elbow detection, got {v.size}")
    if elbow_index not in (1, 2):
        raise ValueError(f"elbow_index must be 1 or 2, got {elbow_index}")
    q1 = _first_elbow(v)
    if elbow_index == 1:
        return q1
    rest = v[q1:]
    if rest.size < 2:
        warnings.warn("too few values past the first elbow; returning the first elbow", RuntimeWarning)
        return q1
    return q1 + _first_elbow(rest)


def select_dimension(values, elbow: int = 2) -> int:
    """Elbow-based dimension that also tolerates very short scree sequences."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no values to select a dimension from")
    if v.size < 3:
        return 1
    return zhu_ghodsi(v, elbow)
