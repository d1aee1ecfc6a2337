"""Versioned JSON model files.

Numeric arrays are stored row-major as base64 of little-endian 64-bit
values (``<f8`` or ``<i8``) next to their shape, so a save/load round trip
is bit-identical. The header (format tag, version, kind) is checked before
any payload is decoded.
"""

from __future__ import annotations

import base64
import datetime as _dt
import json
from dataclasses import asdict
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .bandpower import Band, BandSet, BfModel, PsdParams
from .forest import Forest, ForestParams, Tree
from .graphcore import TsgModel

FORMAT = "tsgeeg-artifact"
VERSION = 1
KINDS = ("tsg-model", "bf-model", "forest", "bundle")


class ArtifactError(ValueError):
    pass


def encode_array(a) -> dict:
    a = np.asarray(a)
    if a.dtype.kind == "f":
        dtype = "<f8"
    elif a.dtype.kind in "iub":
        dtype = "<i8"
    else:
        raise ArtifactError(f"cannot store arrays of dtype {a.dtype}")
    data = np.ascontiguousarray(a, dtype=dtype).tobytes()
    return {"dtype": dtype, "shape": list(a.shape), "data": base64.b64encode(data).decode("ascii")}


def decode_array(obj: dict) -> np.ndarray:
    try:
        dtype, shape, data = obj["dtype"], tuple(obj["shape"]), obj["data"]
    except (KeyError, TypeError) as exc:
        raise ArtifactError(f"malformed array entry: {exc}") from exc
    if dtype not in ("<f8", "<i8"):
        raise ArtifactError(f"unsupported array dtype {dtype!r}")
    raw = base64.b64decode(data.encode("ascii"), validate=True)
    n = int(np.prod(shape)) if shape else 1
    if len(raw) != 8 * n:
        raise ArtifactError(f"array payload has {len(raw)} bytes, shape {list(shape)} needs {8 * n}")
    a = np.frombuffer(raw, dtype=dtype).reshape(shape)
    return a.astype(np.float64 if dtype == "<f8" else np.int64)


# --------------------------------------------------------------------------- components


def _tsg_payload(m: TsgModel) -> dict:
    return {
        "training_graphs": encode_array(m.training_graphs),
        "dist_min": m.dist_min,
        "dist_max": m.dist_max,
        "embedding": encode_array(m.embedding),
        "singular_values": encode_array(m.singular_values),
        "projector": encode_array(m.projector),
    }


def _tsg_from(p: dict) -> TsgModel:
    arrays = {k: decode_array(p[k]) for k in ("training_graphs", "embedding", "singular_values", "projector")}
    for a in arrays.values():
        a.setflags(write=False)
    return TsgModel(dist_min=float(p["dist_min"]), dist_max=float(p["dist_max"]), **arrays)


def _bands_payload(bs: BandSet | None):
    return None if bs is None else [[b.name, b.low, b.high] for b in bs.bands]


def _bands_from(obj) -> BandSet | None:
    return None if obj is None else BandSet(tuple(Band(str(n), float(lo), float(hi)) for n, lo, hi in obj))


def _bf_payload(m: BfModel) -> dict:
    return {
        "pca_mean": encode_array(m.pca_mean),
        "pca_loadings": encode_array(m.pca_loadings),
        "singular_values": encode_array(m.singular_values),
        "band_set": _bands_payload(m.band_set),
        "psd": asdict(m.psd_params),
    }


def _bf_from(p: dict) -> BfModel:
    return BfModel(decode_array(p["pca_mean"]), decode_array(p["pca_loadings"]), decode_array(p["singular_values"]),
                   _bands_from(p.get("band_set")), PsdParams(**p.get("psd", {})))


def _forest_payload(f: Forest) -> dict:
    return {
        "n_features": f.n_features,
        "classes": [c.item() if hasattr(c, "item") else c for c in f.classes],
        "seed": int(f.seed),
        "params": asdict(f.params),
        "trees": [
            {k: encode_array(getattr(t, k)) for k in ("left", "right", "feature", "threshold", "counts")}
            for t in f.trees
        ],
    }


def _forest_from(p: dict) -> Forest:
    trees = tuple(Tree(**{k: decode_array(v) for k, v in t.items()}) for t in p["trees"])
    return Forest(trees, int(p["n_features"]), tuple(p["classes"]), int(p["seed"]), ForestParams(**p["params"]))


_ENCODERS = {"tsg-model": _tsg_payload, "bf-model": _bf_payload, "forest": _forest_payload}
_DECODERS = {"tsg-model": _tsg_from, "bf-model": _bf_from, "forest": _forest_from}
_TYPES = {TsgModel: "tsg-model", BfModel: "bf-model", Forest: "forest"}


def kind_of(obj) -> str:
    if isinstance(obj, dict):
        return "bundle"
    try:
        return _TYPES[type(obj)]
    except KeyError:
        raise ArtifactError(f"cannot store objects of type {type(obj).__name__}") from None


def _encode_payload(obj) -> dict:
    kind = kind_of(obj)
    if kind != "bundle":
        return _ENCODERS[kind](obj)
    comps, meta = {}, {}
    for name, value in obj.items():
        if type(value) in _TYPES:
            comps[name] = {"kind": kind_of(value), "payload": _ENCODERS[kind_of(value)](value)}
        else:
            meta[name] = value
    return {"components": comps, "meta": meta}


def _decode_payload(kind: str, payload: dict):
    if kind != "bundle":
        return _DECODERS[kind](payload)
    out = dict(payload.get("meta", {}))
    for name, comp in payload["components"].items():
        if comp["kind"] not in _DECODERS:
            raise ArtifactError(f"unknown component kind {comp['kind']!r}")
        out[name] = _DECODERS[comp["kind"]](comp["payload"])
    return out


# --------------------------------------------------------------------------- files


def dumps(obj, config_hash: str = "", created: dict | None = None) -> str:
    """Serialize a model (or a dict bundle of models plus JSON metadata)."""
    created = created or {
        "utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "package_version": __version__,
    }
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "kind": kind_of(obj),
        "config_hash": config_hash,
        "created": created,
        "payload": _encode_payload(obj),
    }
    return json.dumps(doc, sort_keys=True)


def read_header(doc: dict) -> dict:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ArtifactError("not a model artifact (missing format tag)")
    if doc.get("version") != VERSION:
        raise ArtifactError(f"artifact version {doc.get('version')!r} is not supported (expected {VERSION})")
    if doc.get("kind") not in KINDS:
        raise ArtifactError(f"unknown artifact kind {doc.get('kind')!r}")
    return {k: doc.get(k) for k in ("format", "version", "kind", "config_hash", "created")}


def loads(text: str) -> tuple[Any, dict]:
    """Return ``(object, header)``; the header is validated before decoding the payload."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"artifact is not valid JSON: {exc}") from exc
    header = read_header(doc)
    try:
        return _decode_payload(header["kind"], doc["payload"]), header
    except (KeyError, TypeError) as exc:
        raise ArtifactError(f"malformed {header['kind']} payload: {exc}") from exc


def save(path, obj, config_hash: str = "", created: dict | None = None) -> None:
    Path(path).write_text(dumps(obj, config_hash, created))


def load(path) -> tuple[Any, dict]:
    return loads(Path(path).read_text())
