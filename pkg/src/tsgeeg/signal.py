"""Recordings, EDF/CSV ingestion, zero-phase band filtering and windowing."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import signal as sps

FILTER_ORDER = 4
ANNOTATION_LABEL = "EDF Annotations"


class ParseError(ValueError):
    """Malformed input file. ``offset`` is a byte offset (EDF) or ``None``."""

    def __init__(self, message: str, offset: Optional[int] = None):
        super().__init__(message if offset is None else f"{message} (byte offset {offset})")
        self.offset = offset


class ScalingError(ValueError):
    pass


class FilterError(ValueError):
    pass


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class RecordingMeta:
    subject: str = ""
    session: str = ""
    label: Optional[int] = None
    source: str = ""


@dataclass(frozen=True)
class EdfCalibration:
    """Per-signal scaling kept from an EDF header so a writer can reproduce it."""

    physical_min: np.ndarray
    physical_max: np.ndarray
    digital_min: np.ndarray
    digital_max: np.ndarray
    record_duration: float
    samples_per_record: int


@dataclass(frozen=True)
class Recording:
    samples: np.ndarray  # (n_channels, n_samples), microvolts
    sample_rate: float
    channel_names: tuple[str, ...]
    meta: RecordingMeta = field(default_factory=RecordingMeta)
    edf: Optional[EdfCalibration] = None

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 2:
            raise ValueError(f"samples must be 2-D (channels x samples), got shape {samples.shape}")
        n_c, n_t = samples.shape
        if n_c < 2:
            raise ValueError(f"a recording needs at least 2 channels, got {n_c}")
        if n_t < 1:
            raise ValueError("a recording needs at least 1 sample")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        names = tuple(str(c) for c in self.channel_names)
        if len(names) != n_c:
            raise ValueError(f"{len(names)} channel names for {n_c} channels")
        if len(set(names)) != n_c:
            raise ValueError(f"channel names must be unique: {names}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    def select_channels(self, channels: Sequence[int]) -> "Recording":
        idx = list(channels)
        return replace(
            self,
            samples=self.samples[idx],
            channel_names=tuple(self.channel_names[i] for i in idx),
            edf=None,
        )


@dataclass(frozen=True)
class WindowSet:
    windows: np.ndarray  # (n_windows, n_channels, window_len)
    window_len: int
    overlap: int
    labels: Optional[np.ndarray] = None
    provenance: tuple[RecordingMeta, ...] = ()

    def __post_init__(self):
        windows = np.asarray(self.windows, dtype=np.float64)
        if windows.ndim != 3 or windows.shape[2] != self.window_len:
            raise ValueError(f"windows must have shape (n_w, n_c, {self.window_len}), got {windows.shape}")
        if not 0 <= self.overlap < self.window_len:
            raise ValueError(f"need 0 <= overlap < window_len, got {self.overlap}, {self.window_len}")
        windows.setflags(write=False)
        object.__setattr__(self, "windows", windows)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (windows.shape[0],):
                raise ValueError("one label per window required")
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.windows.shape[0]

    @property
    def n_channels(self) -> int:
        return self.windows.shape[1]

    @classmethod
    def concatenate(cls, sets: Sequence["WindowSet"]) -> "WindowSet":
        if not sets:
            raise WindowError("nothing to concatenate")
        w, h = sets[0].window_len, sets[0].overlap
        if any(s.window_len != w for s in sets):
            raise ValueError("window lengths differ")
        labels = None
        if all(s.labels is not None for s in sets):
            labels = np.concatenate([s.labels for s in sets])
        return cls(
            windows=np.concatenate([s.windows for s in sets]),
            window_len=w,
            overlap=h,
            labels=labels,
            provenance=tuple(p for s in sets for p in s.provenance),
        )


# --------------------------------------------------------------------------- EDF

_MAIN_FIELDS = (  # (name, width)
    ("version", 8),
    ("patient", 80),
    ("recording", 80),
    ("startdate", 8),
    ("starttime", 8),
    ("header_bytes", 8),
    ("reserved", 44),
    ("n_records", 8),
    ("record_duration", 8),
    ("n_signals", 4),
)
_SIGNAL_FIELDS = (
    ("label", 16),
    ("transducer", 80),
    ("physical_dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefiltering", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
)


def _number(raw: bytes, offset: int, name: str, kind=float):
    text = raw.decode("ascii", errors="replace").strip()
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric header field {name!r}: {text!r}", offset) from None
    if kind is int:
        if value != int(value):
            raise ParseError(f"header field {name!r} must be an integer: {text!r}", offset)
        return int(value)
    return value


def parse_edf(data: bytes, meta: Optional[RecordingMeta] = None) -> Recording:
    """Parse a continuous EDF file held in memory.

    Digital samples are mapped to physical units with each signal's
    ``(physical_min, physical_max, digital_min, digital_max)``. Annotation
    signals are dropped. A record count of -1 is replaced by the number of
    whole records present in the data section.
    """
    data = bytes(data)
    if len(data) < 256:
        raise ParseError(f"EDF header truncated: {len(data)} of 256 bytes", len(data))
    pos = 0
    main = {}
    for name, width in _MAIN_FIELDS:
        main[name] = (data[pos : pos + width], pos)
        pos += width
    header_bytes = _number(*main["header_bytes"], "header_bytes", int)
    n_records = _number(*main["n_records"], "n_records", int)
    duration = _number(*main["record_duration"], "record_duration")
    ns = _number(*main["n_signals"], "n_signals", int)
    if ns < 1:
        raise ParseError(f"number of signals must be positive, got {ns}", main["n_signals"][1])
    expected = 256 * (ns + 1)
    if header_bytes != expected:
        raise ParseError(f"header size field says {header_bytes} bytes, expected {expected}", main["header_bytes"][1])
    if len(data) < expected:
        raise ParseError(f"signal headers truncated: {len(data)} of {expected} bytes", len(data))
    if duration <= 0:
        raise ParseError(f"record duration must be positive, got {duration}", main["record_duration"][1])

    sig: dict[str, list] = {name: [] for name, _ in _SIGNAL_FIELDS}
    for name, width in _SIGNAL_FIELDS:
        for i in range(ns):
            raw = data[pos : pos + width]
            if name in ("label", "transducer", "physical_dimension", "prefiltering", "reserved"):
                sig[name].append(raw.decode("latin-1").strip())
            elif name in ("digital_min", "digital_max", "samples_per_record"):
                sig[name].append(_number(raw, pos, f"{name}[{i}]", int))
            else:
                sig[name].append(_number(raw, pos, f"{name}[{i}]"))
            pos += width

    spr = np.array(sig["samples_per_record"], dtype=np.int64)
    if np.any(spr < 1):
        raise ParseError("samples per record must be positive", 256 + 216 * ns)
    record_size = int(spr.sum()) * 2
    body = len(data) - expected
    if n_records == -1:
        n_records = body // record_size
    if n_records < 1:
        raise ParseError("no data records", expected)
    needed = n_records * record_size
    if body < needed:
        bad = body // record_size
        raise ParseError(f"data record {bad} truncated", expected + bad * record_size)

    keep = [i for i in range(ns) if sig["label"][i] != ANNOTATION_LABEL]
    if len(keep) < 1:
        raise ParseError("no signal channels (annotations only)", 256)
    rates = {int(spr[i]) for i in keep}
    if len(rates) > 1:
        raise ParseError(f"signals have differing sampling rates: samples per record {sorted(rates)}", 256 + 216 * ns)

    raw = np.frombuffer(data, dtype="<i2", count=needed // 2, offset=expected).reshape(n_records, -1)
    starts = np.concatenate([[0], np.cumsum(spr)])
    pmin = np.array([sig["physical_min"][i] for i in keep])
    pmax = np.array([sig["physical_max"][i] for i in keep])
    dmin = np.array([sig["digital_min"][i] for i in keep], dtype=np.float64)
    dmax = np.array([sig["digital_max"][i] for i in keep], dtype=np.float64)
    if np.any(dmax == dmin):
        bad = [sig["label"][keep[j]] for j in np.flatnonzero(dmax == dmin)]
        raise ScalingError(f"digital_min == digital_max for signals {bad}")
    n_per = int(spr[keep[0]])
    digital = np.stack([raw[:, starts[i] : starts[i] + n_per].reshape(-1) for i in keep]).astype(np.float64)
    gain = (pmax - pmin) / (dmax - dmin)
    physical = pmin[:, None] + (digital - dmin[:, None]) * gain[:, None]

    calibration = EdfCalibration(
        physical_min=pmin,
        physical_max=pmax,
        digital_min=dmin.astype(np.int64),
        digital_max=dmax.astype(np.int64),
        record_duration=duration,
        samples_per_record=n_per,
    )
    return Recording(
        samples=physical,
        sample_rate=n_per / duration,
        channel_names=tuple(sig["label"][i] for i in keep),
        meta=meta or RecordingMeta(),
        edf=calibration,
    )


def _field(value, width: int) -> bytes:
    if isinstance(value, float):
        if value.is_integer():
            text = str(int(value))
        else:
            text = repr(value)
            digits = width
            while len(text) > width and digits > 1:
                text = f"{value:.{digits}g}"
                digits -= 1
    else:
        text = str(value)
    raw = text.encode("ascii")
    if len(raw) > width:
        raise ValueError(f"value {text!r} does not fit in {width} header bytes")
    return raw.ljust(width, b" ")


def write_edf(rec: Recording, record_duration: Optional[float] = None) -> bytes:
    """Minimal EDF writer (fixtures and synthetic exports only).

    Reuses the recording's EDF calibration when present; otherwise maps
    each channel's data range onto the full 16-bit digital range.
    """
    n_c, n_t = rec.samples.shape
    if rec.edf is not None:
        pmin, pmax = rec.edf.physical_min, rec.edf.physical_max
        dmin, dmax = rec.edf.digital_min, rec.edf.digital_max
        n_per = rec.edf.samples_per_record
        duration = rec.edf.record_duration
    else:
        lo = rec.samples.min(axis=1)
        hi = rec.samples.max(axis=1)
        span = np.maximum(hi - lo, 1e-6)
        pmin = np.round(lo - 0.01 * span, 3)
        pmax = np.round(hi + 0.01 * span, 3)
        dmin = np.full(n_c, -32768, dtype=np.int64)
        dmax = np.full(n_c, 32767, dtype=np.int64)
        duration = record_duration or 1.0
        n_per = int(round(rec.sample_rate * duration))
        if n_per < 1 or abs(n_per - rec.sample_rate * duration) > 1e-9 or n_t % n_per:
            n_per, duration = n_t, n_t / rec.sample_rate
    if n_t % n_per:
        raise ValueError(f"{n_t} samples is not a whole number of {n_per}-sample records")
    n_records = n_t // n_per

    gain = (pmax - pmin) / (dmax - dmin)
    digital = np.round((rec.samples - pmin[:, None]) / gain[:, None] + dmin[:, None])
    digital = np.clip(digital, dmin[:, None], dmax[:, None]).astype("<i2")

    head = b"".join(
        [
            _field("0", 8),
            _field(rec.meta.subject or "X", 80),
            _field(rec.meta.session or "X", 80),
            _field("01.01.00", 8),
            _field("00.00.00", 8),
            _field(256 * (n_c + 1), 8),
            _field("", 44),
            _field(n_records, 8),
            _field(float(duration), 8),
            _field(n_c, 4),
        ]
    )
    columns = {
        "label": [_field(name, 16) for name in rec.channel_names],
        "transducer": [_field("", 80)] * n_c,
        "physical_dimension": [_field("uV", 8)] * n_c,
        "physical_min": [_field(float(v), 8) for v in pmin],
        "physical_max": [_field(float(v), 8) for v in pmax],
        "digital_min": [_field(int(v), 8) for v in dmin],
        "digital_max": [_field(int(v), 8) for v in dmax],
        "prefiltering": [_field("", 80)] * n_c,
        "samples_per_record": [_field(n_per, 8)] * n_c,
        "reserved": [_field("", 32)] * n_c,
    }
    signal_head = b"".join(b"".join(columns[name]) for name, _ in _SIGNAL_FIELDS)
    body = digital.reshape(n_c, n_records, n_per).transpose(1, 0, 2).tobytes()
    return head + signal_head + body


# --------------------------------------------------------------------------- CSV


def parse_csv(text: str | io.TextIOBase, sample_rate: float, meta: Optional[RecordingMeta] = None) -> Recording:
    """Parse a header-plus-rows CSV (one time sample per row)."""
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty CSV: missing header row") from None
    names = [h.strip() for h in header]
    rows = []
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(names):
            raise ParseError(f"ragged row {row_no}: {len(row)} values for {len(names)} channels")
        values = []
        for col_no, cell in enumerate(row, start=1):
            try:
                values.append(float(cell))
            except ValueError:
                raise ParseError(f"non-numeric value {cell!r} at row {row_no}, column {col_no}") from None
        rows.append(values)
    if not rows:
        raise ParseError("no samples")
    return Recording(
        samples=np.array(rows, dtype=np.float64).T,
        sample_rate=sample_rate,
        channel_names=tuple(names),
        meta=meta or RecordingMeta(),
    )


# --------------------------------------------------------------------------- filtering


def _pad_length(n_samples: int, sample_rate: float, high_pass: float) -> int:
    base = 3 * (FILTER_ORDER + 1)
    if high_pass > 0:
        # the slowest pole sets how long edge transients last
        base = max(base, int(math.ceil(sample_rate / high_pass)))
    return min(base, n_samples - 1)


def bandpass_filter(rec: Recording, high_pass: float, low_pass: float) -> Recording:
    """Zero-phase 4th-order Butterworth high-pass then low-pass, per channel.

    A ``high_pass`` of 0 skips the high-pass stage.
    """
    nyquist = rec.sample_rate / 2
    if not 0 <= high_pass < low_pass:
        raise FilterError(f"need 0 <= high_pass < low_pass, got {high_pass}, {low_pass}")
    if low_pass >= nyquist:
        raise FilterError(f"low-pass cutoff {low_pass} Hz is not below Nyquist ({nyquist} Hz)")
    min_len = 3 * FILTER_ORDER + 1
    if rec.n_samples < min_len:
        raise FilterError(f"recording has {rec.n_samples} samples; filtering needs at least {min_len}")

    padlen = _pad_length(rec.n_samples, rec.sample_rate, high_pass)
    x = rec.samples
    if high_pass > 0:
        sos = sps.butter(FILTER_ORDER, high_pass, btype="highpass", fs=rec.sample_rate, output="sos")
        x = sps.sosfiltfilt(sos, x, axis=1, padtype="even", padlen=padlen)
    sos = sps.butter(FILTER_ORDER, low_pass, btype="lowpass", fs=rec.sample_rate, output="sos")
    x = sps.sosfiltfilt(sos, x, axis=1, padtype="even", padlen=padlen)
    return replace(rec, samples=x, edf=None)


# --------------------------------------------------------------------------- windowing


def n_windows(n_samples: int, w: int, h: int) -> int:
    if w > n_samples:
        return 0
    return (n_samples - h) // (w - h)


def window(rec: Recording, w: int, h: int = 0) -> WindowSet:
    """Cut ``rec`` into windows of ``w`` samples overlapping by ``h``.

    Window k covers samples ``k*(w-h) ... k*(w-h)+w-1``; a trailing partial
    window is discarded.
    """
    w, h = int(w), int(h)
    if not 0 <= h < w:
        raise WindowError(f"need 0 <= overlap < window length, got h={h}, w={w}")
    n_w = n_windows(rec.n_samples, w, h)
    if n_w < 1:
        raise WindowError(f"window of {w} samples is longer than the recording ({rec.n_samples} samples)")
    step = w - h
    idx = np.arange(n_w)[:, None] * step + np.arange(w)[None, :]
    windows = rec.samples[:, idx].transpose(1, 0, 2)
    labels = None
    if rec.meta.label is not None:
        labels = np.full(n_w, rec.meta.label, dtype=np.int64)
    return WindowSet(windows=windows, window_len=w, overlap=h, labels=labels, provenance=(rec.meta,) * n_w)


def window_seconds(rec: Recording, seconds: float, overlap_seconds: float = 0.0) -> WindowSet:
    w = int(round(seconds * rec.sample_rate))
    h = int(round(overlap_seconds * rec.sample_rate))
    return window(rec, w, h)
