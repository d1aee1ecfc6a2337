"""Band-frequency (BF) features: Welch PSD, per-channel band masses, PCA."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import signal as sps

from .dimselect import select_dimension
from .signal import WindowSet


@dataclass(frozen=True)
class Band:
    name: str
    low: float
    high: float


@dataclass(frozen=True)
class BandSet:
    bands: tuple[Band, ...]

    def __post_init__(self):
        bands = tuple(b if isinstance(b, Band) else Band(*b) for b in self.bands)
        if not bands:
            raise ValueError("a band set needs at least one band")
        for b in bands:
            if not b.low < b.high:
                raise ValueError(f"band {b.name!r} has low >= high")
        for a, b in zip(bands, bands[1:]):
            if b.low < a.low or b.low < a.high:
                raise ValueError(f"bands {a.name!r} and {b.name!r} overlap or are unsorted")
        object.__setattr__(self, "bands", bands)

    def __len__(self) -> int:
        return len(self.bands)

    @property
    def names(self) -> list[str]:
        return [b.name for b in self.bands]

    def edges(self) -> np.ndarray:
        return np.array([[b.low, b.high] for b in self.bands])


# theta, alpha and beta sub-bands used for the Mental Math protocol
DEFAULT_BANDS = BandSet(
    (
        Band("theta_low", 4.1, 5.8),
        Band("theta_high", 5.9, 7.4),
        Band("alpha_low", 7.4, 8.9),
        Band("alpha_mid", 9.0, 11.0),
        Band("alpha_high", 11.1, 12.9),
        Band("beta_low", 13.0, 19.9),
        Band("beta_mid", 20.0, 25.0),
        Band("beta_high", 25.0, 30.0),
    )
)


@dataclass(frozen=True)
class PsdParams:
    segment: int = 256
    overlap: float = 0.5
    taper: str = "hann"

    def clipped(self, n: int) -> "PsdParams":
        """Same parameters with the segment shortened to at most ``n`` samples."""
        return replace(self, segment=min(n, self.segment))


def welch_psd(x: np.ndarray, sample_rate: float, params: PsdParams = PsdParams()):
    """One-sided Welch PSD along the last axis.

    Hann taper, ``params.overlap`` fractional segment overlap, mean
    averaging, no detrending.

    Returns
    -------
    freqs : ndarray
    power : ndarray
        Density in units**2/Hz with the same leading shape as ``x``.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    seg = params.segment
    if seg > n:
        raise ValueError(f"segment length {seg} exceeds signal length {n}")
    if seg < 8:
        raise ValueError(f"segment length {seg} is below the minimum of 8 samples")
    noverlap = int(seg * params.overlap)
    return sps.welch(
        x,
        fs=sample_rate,
        window=params.taper,
        nperseg=seg,
        noverlap=noverlap,
        detrend=False,
        scaling="density",
        average="mean",
        axis=-1,
    )


def band_masks(freqs: np.ndarray, band_set: BandSet) -> np.ndarray:
    """Boolean (I, n_freqs) bin membership with half-open ``[low, high)`` bands."""
    edges = band_set.edges()
    return (freqs[None, :] >= edges[:, :1]) & (freqs[None, :] < edges[:, 1:])


def band_powers(windows: np.ndarray, sample_rate: float, band_set: BandSet = DEFAULT_BANDS,
                psd_params: PsdParams = PsdParams()) -> np.ndarray:
    """Raw band powers, shape (n_w, n_c, I)."""
    if np.any(band_set.edges() >= sample_rate / 2):
        raise ValueError(f"band edges must lie below Nyquist ({sample_rate / 2} Hz)")
    freqs, psd = welch_psd(windows, sample_rate, psd_params.clipped(windows.shape[-1]))
    masks = band_masks(freqs, band_set).astype(np.float64)
    return psd @ masks.T


def normalize_band_powers(powers: np.ndarray) -> tuple[np.ndarray, int]:
    """Scale each channel's band powers onto the simplex.

    Channels with zero in-band power get the uniform vector; their count is
    returned alongside the normalized tensor.
    """
    total = powers.sum(axis=-1, keepdims=True)
    dead = total[..., 0] <= 0
    out = np.divide(powers, total, out=np.zeros_like(powers), where=total > 0)
    out[dead] = 1.0 / powers.shape[-1]
    return out, int(dead.sum())


def band_tensor(ws: WindowSet | np.ndarray, sample_rate: float, band_set: BandSet = DEFAULT_BANDS,
                psd_params: PsdParams = PsdParams()) -> np.ndarray:
    windows = ws.windows if isinstance(ws, WindowSet) else np.asarray(ws, dtype=np.float64)
    norm, n_dead = normalize_band_powers(band_powers(windows, sample_rate, band_set, psd_params))
    if n_dead:
        warnings.warn(f"{n_dead} window/channel pairs had zero in-band power; set to uniform", RuntimeWarning)
    return norm


def band_features(ws: WindowSet | np.ndarray, sample_rate: float, band_set: BandSet = DEFAULT_BANDS,
                  psd_params: PsdParams = PsdParams()) -> np.ndarray:
    """Normalized band masses flattened channel-major, shape (n_w, n_c * I)."""
    t = band_tensor(ws, sample_rate, band_set, psd_params)
    return t.reshape(t.shape[0], -1)


@dataclass(frozen=True)
class BfModel:
    pca_mean: np.ndarray
    pca_loadings: np.ndarray  # (p, d_bf), orthonormal columns
    singular_values: np.ndarray
    band_set: Optional[BandSet] = None
    psd_params: PsdParams = field(default_factory=PsdParams)

    @property
    def d(self) -> int:
        return self.pca_loadings.shape[1]

    @property
    def n_features(self) -> int:
        return self.pca_loadings.shape[0]


def _orient(v: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is nonnegative."""
    rows = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[rows, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def fit_bf(features: np.ndarray, band_set: Optional[BandSet] = None,
           psd_params: PsdParams = PsdParams(), d: Optional[int] = None) -> BfModel:
    """PCA of mean-centered features; dimension from the second scree elbow.

    Parameters
    ----------
    features : ndarray, shape (n_w, p)
    d : int, optional
        Fixed dimension, bypassing elbow selection.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need a 2-D matrix with at least 2 rows, got shape {x.shape}")
    n, p = x.shape
    mean = x.mean(axis=0)
    centered = x - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    tol = max(n, p) * np.finfo(float).eps * max(s[0], np.abs(x).max())
    rank = int(np.sum(s > tol))
    if rank == 0:
        raise ValueError("all feature rows are identical (rank 0); PCA is undefined")
    if d is None:
        d = select_dimension(s[:rank], elbow=2)
    d = int(min(max(d, 1), n - 1, p, rank))
    loadings = _orient(vt[:d].T)
    return BfModel(pca_mean=mean, pca_loadings=loadings, singular_values=s[:d],
                   band_set=band_set, psd_params=psd_params)


def apply_bf(model: BfModel, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} feature columns, got {x.shape[1]}")
    return (x - model.pca_mean) @ model.pca_loadings


def fit_bf_windows(ws: WindowSet, sample_rate: float, band_set: BandSet = DEFAULT_BANDS,
                   psd_params: PsdParams = PsdParams()) -> BfModel:
    return fit_bf(band_features(ws, sample_rate, band_set, psd_params), band_set, psd_params)


def band_set_from_spec(spec: Sequence) -> BandSet:
    """Build a BandSet from ``[name, low, high]`` triples or mappings."""
    bands = []
    for item in spec:
        if isinstance(item, dict):
            bands.append(Band(str(item["name"]), float(item["low"]), float(item["high"])))
        else:
            name, low, high = item
            bands.append(Band(str(name), float(low), float(high)))
    return BandSet(tuple(bands))
