"""Synthetic two-class EEG-like recordings with known spectral and spatial structure.

Each class fixes a band-gain profile (shape of the power spectrum) and a
channel correlation matrix. Channels start as independent Gaussian noise
shaped in the frequency domain to the class spectrum, are scaled to unit
variance and are then mixed by a square root of the class correlation
matrix, so every channel carries the class spectrum and the channels
jointly carry the class correlation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..bandpower import DEFAULT_BANDS, BandSet, band_masks
from ..signal import Recording, RecordingMeta


@dataclass(frozen=True)
class ClassSpec:
    band_gains: np.ndarray  # (I,) power gain per band, applied on top of a flat spectrum
    correlation: np.ndarray  # (n_c, n_c)


def _mixing_matrix(corr: np.ndarray) -> np.ndarray:
    corr = np.asarray(corr, dtype=np.float64)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise ValueError(f"correlation must be square, got {corr.shape}")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ValueError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise ValueError("correlation matrix must have a unit diagonal")
    evals, evecs = np.linalg.eigh(corr)
    if evals.min() < -1e-10:
        raise ValueError(f"correlation matrix is not positive semidefinite (min eigenvalue {evals.min():.3g})")
    return evecs @ np.diag(np.sqrt(np.clip(evals, 0, None))) @ evecs.T


def shaped_noise(rng: np.random.Generator, n_c: int, n_t: int, sample_rate: float, band_gains: np.ndarray,
                 band_set: BandSet, f_lo: float = 1.0, f_hi: float = 40.0) -> np.ndarray:
    """Independent unit-variance channels with a band-shaped power spectrum."""
    freqs = np.fft.rfftfreq(n_t, 1.0 / sample_rate)
    power = ((freqs >= f_lo) & (freqs <= f_hi)).astype(np.float64)
    masks = band_masks(freqs, band_set)
    for gain, mask in zip(np.asarray(band_gains, dtype=np.float64), masks):
        power[mask] *= gain
    spec = np.fft.rfft(rng.standard_normal((n_c, n_t)), axis=1) * np.sqrt(power)
    x = np.fft.irfft(spec, n=n_t, axis=1)
    x -= x.mean(axis=1, keepdims=True)
    return x / x.std(axis=1, keepdims=True)


def synth_recording(rng: np.random.Generator, spec: ClassSpec, n_t: int, sample_rate: float,
                    band_set: BandSet, amplitude_uv: float = 20.0) -> np.ndarray:
    mix = _mixing_matrix(spec.correlation)
    n_c = mix.shape[0]
    return amplitude_uv * (mix @ shaped_noise(rng, n_c, n_t, sample_rate, spec.band_gains, band_set))


def synth_dataset(n_subjects: int, n_c: int, sample_rate: float, class_specs: Sequence[ClassSpec], seed: int = 0,
                  duration_s: float = 60.0, n_sessions: int = 1, band_set: BandSet = DEFAULT_BANDS,
                  amplitude_uv: float = 20.0) -> list[Recording]:
    """One recording per (subject, session, class), labels 0..len(class_specs)-1.

    Subjects are named ``S01``, ``S02``, ... and sessions ``1``, ``2``, ...
    """
    if len(class_specs) < 2:
        raise ValueError("need at least two class specs")
    for spec in class_specs:
        _mixing_matrix(spec.correlation)  # validate up front
        if np.asarray(spec.correlation).shape[0] != n_c:
            raise ValueError(f"class correlation must be {n_c}x{n_c}")
        if np.asarray(spec.band_gains).shape != (len(band_set),):
            raise ValueError(f"band_gains must have {len(band_set)} entries")
    n_t = int(round(duration_s * sample_rate))
    names = tuple(f"C{i + 1}" for i in range(n_c))
    root = np.random.SeedSequence(seed)
    recs = []
    for s_idx, s_seq in enumerate(root.spawn(n_subjects)):
        for sess, sess_seq in enumerate(s_seq.spawn(n_sessions), start=1):
            for label, (spec, c_seq) in enumerate(zip(class_specs, sess_seq.spawn(len(class_specs)))):
                x = synth_recording(np.random.default_rng(c_seq), spec, n_t, sample_rate, band_set, amplitude_uv)
                meta = RecordingMeta(subject=f"S{s_idx + 1:02d}", session=str(sess), label=label,
                                     source=f"synth:S{s_idx + 1:02d}/{sess}/{label}")
                recs.append(Recording(samples=x, sample_rate=sample_rate, channel_names=names, meta=meta))
    return recs


# --------------------------------------------------------------------------- presets


def uniform_correlation(n_c: int, rho: float) -> np.ndarray:
    c = np.full((n_c, n_c), rho)
    np.fill_diagonal(c, 1.0)
    return c


def block_correlation(n_c: int, rho: float, n_blocks: int = 2) -> np.ndarray:
    c = np.zeros((n_c, n_c))
    for block in np.array_split(np.arange(n_c), n_blocks):
        c[np.ix_(block, block)] = rho
    np.fill_diagonal(c, 1.0)
    return c


def flat_gains(band_set: BandSet = DEFAULT_BANDS) -> np.ndarray:
    return np.ones(len(band_set))


def identical_specs(n_c: int, band_set: BandSet = DEFAULT_BANDS, rho: float = 0.3) -> list[ClassSpec]:
    spec = ClassSpec(flat_gains(band_set), uniform_correlation(n_c, rho))
    return [spec, spec]


def correlation_only_specs(n_c: int, band_set: BandSet = DEFAULT_BANDS, rho_uniform: float = 0.3,
                           rho_block: float = 0.6) -> list[ClassSpec]:
    """Same spectrum for both classes; uniform vs two-block correlation."""
    g = flat_gains(band_set)
    return [ClassSpec(g, uniform_correlation(n_c, rho_uniform)), ClassSpec(g, block_correlation(n_c, rho_block))]


def band_only_specs(n_c: int, band_set: BandSet = DEFAULT_BANDS, rho: float = 0.3, gain: float = 3.0,
                    boosted: Sequence[str] = ("alpha_low", "alpha_mid", "alpha_high")) -> list[ClassSpec]:
    """Same correlation for both classes; class 1 has boosted power in ``boosted`` bands."""
    corr = uniform_correlation(n_c, rho)
    g1 = np.array([gain if b.name in boosted else 1.0 for b in band_set.bands])
    return [ClassSpec(flat_gains(band_set), corr), ClassSpec(g1, corr)]


def planted_pair_specs(n_c: int, pair: Sequence[int] = (3, 4), rho: float = 0.8,
                       band_set: BandSet = DEFAULT_BANDS, background: Optional[float] = 0.0) -> list[ClassSpec]:
    """Class signal only in the correlation between the two channels of ``pair``."""
    i, j = pair
    c0 = uniform_correlation(n_c, background)
    c1 = c0.copy()
    c1[i, j] = c1[j, i] = rho
    return [ClassSpec(flat_gains(band_set), c0), ClassSpec(flat_gains(band_set), c1)]
