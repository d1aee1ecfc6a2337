"""Time-series-of-graphs (TSG) features.

Each window becomes a channel-by-channel Pearson correlation graph. The
graphs are compared by Frobenius distance, the distances are rescaled to
similarities in [0, 1], and the resulting window-by-window similarity
matrix is embedded with its scaled leading singular vectors. New windows
are mapped into the same space by a similarity-weighted sum of the rows
of the embedding's left pseudo-inverse.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .dimselect import select_dimension, zhu_ghodsi  # noqa: F401  (re-exported)
from .signal import WindowSet


class DegenerateInputError(ValueError):
    pass


def correlation_graphs(windows: np.ndarray) -> np.ndarray:
    """Pearson correlation graph of every window.

    Parameters
    ----------
    windows : ndarray, shape (n_w, n_c, w) or (n_c, w)

    Returns
    -------
    ndarray, shape (n_w, n_c, n_c) (or (n_c, n_c) for a single window)
        Symmetric, unit diagonal, entries in [-1, 1]. A flat channel has
        zero correlation with every other channel.
    """
    x = np.asarray(windows, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.shape[-1] < 2:
        raise ValueError("correlation needs at least 2 samples per window")
    centered = x - x.mean(axis=-1, keepdims=True)
    norms = np.sqrt(np.einsum("kcw,kcw->kc", centered, centered))
    scale = np.abs(x).max(axis=-1)
    flat = norms <= 1e-12 * np.maximum(scale, 1.0) * np.sqrt(x.shape[-1])
    safe = np.where(flat, 1.0, norms)
    unit = centered / safe[..., None]
    unit[flat] = 0.0
    a = unit @ unit.transpose(0, 2, 1)
    a = 0.5 * (a + a.transpose(0, 2, 1))
    np.clip(a, -1.0, 1.0, out=a)
    idx = np.arange(a.shape[1])
    a[:, idx, idx] = 1.0
    return a[0] if single else a


def correlation_graph(window: np.ndarray) -> np.ndarray:
    return correlation_graphs(np.asarray(window)[None])[0]


@dataclass(frozen=True)
class GraphSeries:
    graphs: np.ndarray  # (n_w, n_c, n_c)

    def __post_init__(self):
        g = np.asarray(self.graphs, dtype=np.float64)
        if g.ndim != 3 or g.shape[1] != g.shape[2]:
            raise ValueError(f"graphs must have shape (n_w, n_c, n_c), got {g.shape}")
        g.setflags(write=False)
        object.__setattr__(self, "graphs", g)

    def __len__(self) -> int:
        return self.graphs.shape[0]

    @classmethod
    def from_windows(cls, ws: WindowSet) -> "GraphSeries":
        return cls(correlation_graphs(ws.windows))


def _as_graphs(gs) -> np.ndarray:
    return gs.graphs if isinstance(gs, GraphSeries) else np.asarray(gs, dtype=np.float64)


def pairwise_distances(gs) -> np.ndarray:
    """Frobenius distance between every pair of graphs, shape (n_w, n_w)."""
    g = _as_graphs(gs)
    if g.ndim != 3:
        raise ValueError(f"expected a stack of graphs, got shape {g.shape}")
    if g.shape[0] < 2:
        raise ValueError("need at least 2 graphs")
    return squareform(pdist(g.reshape(g.shape[0], -1)))


def cross_distances(new, train) -> np.ndarray:
    """Frobenius distances from each new graph to each training graph."""
    a, b = _as_graphs(new), _as_graphs(train)
    if a.ndim == 2:
        a = a[None]
    if a.shape[1:] != b.shape[1:]:
        raise ValueError(f"graph size mismatch: {a.shape[1:]} vs {b.shape[1:]}")
    return cdist(a.reshape(a.shape[0], -1), b.reshape(b.shape[0], -1))


def rescale_distances(d: np.ndarray, dist_min: float, dist_max: float, clip: bool = True) -> np.ndarray:
    """``1 - (d - min) / (max - min)``, optionally clipping ``d`` to [min, max] first."""
    if not dist_max > dist_min:
        raise DegenerateInputError(f"all distances equal ({dist_min}); similarity is undefined")
    d = np.asarray(d, dtype=np.float64)
    if clip:
        d = np.clip(d, dist_min, dist_max)
    return 1.0 - (d - dist_min) / (dist_max - dist_min)


def similarity_matrix(D: np.ndarray) -> np.ndarray:
    """Min-max rescaled similarities; min and max are taken over all pairs."""
    D = np.asarray(D, dtype=np.float64)
    return rescale_distances(D, float(D.min()), float(D.max()), clip=False)


def _orient_columns(v: np.ndarray) -> np.ndarray:
    rows = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[rows, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def singular_decomposition(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Singular values (descending) and left singular vectors of ``B``.

    A symmetric ``B`` is handled through its eigendecomposition: singular
    values are the absolute eigenvalues and the eigenvectors are left
    singular vectors.
    """
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {B.shape}")
    if np.array_equal(B, B.T):
        evals, evecs = np.linalg.eigh(B)
        order = np.argsort(-np.abs(evals), kind="stable")
        return np.abs(evals[order]), evecs[:, order]
    u, s, _ = np.linalg.svd(B)
    return s, u


def spectral_embed(B: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Adjacency spectral embedding ``U_d diag(sigma_d)^(1/2)``.

    Each column is signed so that its largest-magnitude entry is
    nonnegative.
    """
    n = np.asarray(B).shape[0]
    if not 1 <= d <= n:
        raise ValueError(f"embedding dimension must be in [1, {n}], got {d}")
    sigma, u = singular_decomposition(B)
    tol = n * np.finfo(float).eps * max(sigma[0], 1.0)
    if np.any(sigma[:d] <= tol):
        warnings.warn(f"dimension {d} exceeds the numerical rank of B; trailing columns are ~0", RuntimeWarning)
    z = _orient_columns(u[:, :d]) * np.sqrt(sigma[:d])
    return z, sigma[:d].copy()


@dataclass(frozen=True)
class TsgModel:
    training_graphs: np.ndarray  # (n_w, n_c, n_c)
    dist_min: float
    dist_max: float
    embedding: np.ndarray  # (n_w, d)
    singular_values: np.ndarray  # (d,)
    projector: np.ndarray  # (d, n_w), (Z^T Z)^-1 Z^T

    @property
    def d(self) -> int:
        return self.embedding.shape[1]

    @property
    def n_channels(self) -> int:
        return self.training_graphs.shape[1]

    @property
    def n_windows(self) -> int:
        return self.training_graphs.shape[0]


def left_pseudo_inverse(z: np.ndarray) -> np.ndarray:
    return np.linalg.solve(z.T @ z, z.T)


def fit_tsg_graphs(graphs, d: Optional[int] = None) -> TsgModel:
    """Fit the TSG embedding from precomputed correlation graphs."""
    g = _as_graphs(graphs)
    n_w = g.shape[0]
    if n_w < 3:
        raise ValueError(f"need at least 3 windows to fit the embedding, got {n_w}")
    D = pairwise_distances(g)
    dmin, dmax = float(D.min()), float(D.max())
    B = similarity_matrix(D)
    if d is None:
        sigma, _ = singular_decomposition(B)
        d = select_dimension(sigma[sigma > 0], elbow=2)
    d = int(min(max(d, 1), n_w - 1))
    z, sv = spectral_embed(B, d)
    g = g.copy()
    for arr in (g, z, sv):
        arr.setflags(write=False)
    proj = left_pseudo_inverse(z)
    proj.setflags(write=False)
    return TsgModel(training_graphs=g, dist_min=dmin, dist_max=dmax, embedding=z,
                    singular_values=sv, projector=proj)


def fit_tsg(ws: WindowSet, d: Optional[int] = None) -> TsgModel:
    """Fit the TSG embedding on a window set."""
    return fit_tsg_graphs(correlation_graphs(ws.windows), d)


def embed_similarities(model: TsgModel, similarities: np.ndarray) -> np.ndarray:
    """Out-of-sample map applied to rows of similarities to the training graphs."""
    s = np.asarray(similarities, dtype=np.float64)
    return s @ model.projector.T


def oos_embed_graphs(model: TsgModel, graphs) -> np.ndarray:
    """Embed new correlation graphs; returns shape (m, d)."""
    g = _as_graphs(graphs)
    if g.ndim == 2:
        g = g[None]
    if g.shape[1] != model.n_channels:
        raise ValueError(f"model has {model.n_channels} channels, graphs have {g.shape[1]}")
    dist = cross_distances(g, model.training_graphs)
    return embed_similarities(model, rescale_distances(dist, model.dist_min, model.dist_max))


def oos_embed(model: TsgModel, window: np.ndarray) -> np.ndarray:
    """Embed one unseen (n_c, w) window; returns a length-d vector."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[0] != model.n_channels:
        raise ValueError(f"model has {model.n_channels} channels, window has shape {window.shape}")
    return oos_embed_graphs(model, correlation_graph(window))[0]


def oos_embed_windows(model: TsgModel, ws: WindowSet | np.ndarray) -> np.ndarray:
    windows = ws.windows if isinstance(ws, WindowSet) else np.asarray(ws, dtype=np.float64)
    if windows.shape[1] != model.n_channels:
        raise ValueError(f"model has {model.n_channels} channels, windows have {windows.shape[1]}")
    return oos_embed_graphs(model, correlation_graphs(windows))
