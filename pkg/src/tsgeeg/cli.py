"""Command-line interface.

Exit status: 0 on success, 1 on a configuration error, 2 on a data or I/O
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import artifact
from .bandpower import DEFAULT_BANDS, PsdParams, band_set_from_spec
from .experiments import synth as synth_mod
from .experiments.config import FEATURE_SETS, ExperimentConfig, PipelineConfig, config_hash
from .experiments.data import SubjectData, prepare_recording, prepare_subjects
from .experiments.protocols import (FeatureMaps, fit_feature_maps, run_in_session, run_nonconstant_querying,
                                     run_transfer, transform)
from .experiments.report import Report, dump_json, plot_csv
from .experiments.subsets import SubsetReport, channel_importance, run_subset_search, size_summary_rows
from .forest import ForestParams, fine_tune, params_from_mapping, predict, predict_posterior, train
from .signal import Recording, RecordingMeta, parse_csv, parse_edf, write_edf


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


# --------------------------------------------------------------------------- configuration

TOP_KEYS = {"manifest", "csv_sample_rate_hz", "channels", "filter", "window", "bands", "psd", "forest", "experiment", "synth",
            "output_dir"}
FILTER_KEYS = {"high_pass_hz", "low_pass_hz"}
WINDOW_KEYS = {"seconds", "overlap_seconds"}
PSD_KEYS = {f.name for f in fields(PsdParams)}
EXPERIMENT_KEYS = {"feature_sets", "fractions", "ratios", "splits", "seed", "querying_fraction", "finetune_fractions",
                   "transfer_mode", "channels", "subset_splits", "subset_fraction", "importance_sizes", "block_split"}
SYNTH_KEYS = {"n_subjects", "n_channels", "sample_rate_hz", "duration_s", "n_sessions", "seed", "generator", "pair",
              "rho", "gain", "amplitude_uv"}
GENERATORS = ("identical", "correlation", "band", "planted")


def _check_keys(section: str, mapping, allowed: set) -> dict:
    if not isinstance(mapping, dict):
        raise ConfigError(f"{section} must be a JSON object")
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        prefix = "" if section == "config" else f"{section}."
        raise ConfigError(f"unknown config key(s): {', '.join(prefix + k for k in unknown)}")
    return mapping


class Config:
    """Validated view of a JSON configuration file."""

    def __init__(self, raw: dict, base_dir: Path = Path(".")):
        _check_keys("config", raw, TOP_KEYS)
        self.raw = raw
        self.base_dir = base_dir
        try:
            filt = _check_keys("filter", raw.get("filter", {}), FILTER_KEYS)
            win = _check_keys("window", raw.get("window", {}), WINDOW_KEYS)
            psd = PsdParams(**_check_keys("psd", raw.get("psd", {}), PSD_KEYS))
            bands = band_set_from_spec(raw["bands"]) if "bands" in raw else DEFAULT_BANDS
            self.pipeline = PipelineConfig(
                high_pass_hz=float(filt.get("high_pass_hz", 0.5)),
                low_pass_hz=float(filt.get("low_pass_hz", 30.0)),
                window_seconds=float(win.get("seconds", 2.5)),
                overlap_seconds=float(win.get("overlap_seconds", 0.0)),
                band_set=bands,
                psd=psd,
            )
            forest = _check_keys("forest", raw.get("forest", {}), {f.name for f in fields(ForestParams)})
            self.forest = params_from_mapping(forest)
            exp = dict(_check_keys("experiment", raw.get("experiment", {}), EXPERIMENT_KEYS))
            for k, v in exp.items():
                if isinstance(v, list):
                    exp[k] = tuple(v)
            self.experiment = ExperimentConfig(pipeline=self.pipeline, forest=self.forest, **exp)
            self.synth = _check_keys("synth", raw.get("synth", {}), SYNTH_KEYS)
            if self.synth.get("generator", "correlation") not in GENERATORS:
                raise ConfigError(f"synth.generator must be one of {GENERATORS}")
        except ConfigError:
            raise
        except KeyError as exc:
            raise ConfigError(f"unknown config key(s): {exc.args[0]}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        self.csv_sample_rate = raw.get("csv_sample_rate_hz")
        self.channels = raw.get("channels")
        if self.channels is not None and (not isinstance(self.channels, list) or not self.channels):
            raise ConfigError("channels must be a nonempty list of channel names or indices")
        self.output_dir = self._path(raw.get("output_dir", "out"))

    def _path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def manifest(self) -> Path:
        if "manifest" not in self.raw:
            raise ConfigError("config has no 'manifest' key")
        return self._path(self.raw["manifest"])

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def load_config(path: str) -> Config:
    p = Path(path)
    try:
        raw = json.loads(p.read_text())
    except FileNotFoundError as exc:
        raise DataError(f"config file not found: {p}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
    return Config(raw, p.parent)


def bundled_config(name: str) -> Path:
    """Path of a shipped default config, e.g. ``mental-math.json``."""
    return Path(__file__).with_name("configs") / name


# --------------------------------------------------------------------------- data loading


def read_recording(path: Path, meta: Optional[RecordingMeta] = None, csv_rate: Optional[float] = None) -> Recording:
    path = Path(path)
    try:
        if path.suffix.lower() == ".csv":
            if csv_rate is None:
                raise ConfigError("csv_sample_rate_hz is required to read CSV recordings")
            return parse_csv(path.read_text(), float(csv_rate), meta)
        return parse_edf(path.read_bytes(), meta)
    except FileNotFoundError as exc:
        raise DataError(f"recording not found: {path}") from exc


def read_manifest(cfg: Config) -> list[Recording]:
    path = cfg.manifest
    try:
        entries = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise DataError(f"manifest not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(entries, list):
        raise DataError(f"{path}: manifest must be a JSON list")
    recs = []
    for i, e in enumerate(entries):
        try:
            _check_keys(f"manifest[{i}]", e, {"path", "subject", "session", "label"})
        except ConfigError as exc:
            raise DataError(str(exc)) from exc
        if "path" not in e:
            raise DataError(f"manifest entry {i} has no path")
        file = Path(e["path"])
        file = file if file.is_absolute() else path.parent / file
        label = e.get("label")
        meta = RecordingMeta(str(e.get("subject", file.stem)), str(e.get("session", "")),
                             None if label is None else int(label), str(file))
        recs.append(select_channels(read_recording(file, meta, cfg.csv_sample_rate), cfg.channels))
    return recs


def select_channels(rec: Recording, channels: Optional[Sequence]) -> Recording:
    """Keep ``channels`` (names or zero-based indices) in the given order."""
    if channels is None:
        return rec
    idx = []
    for c in channels:
        if isinstance(c, str):
            if c not in rec.channel_names:
                raise DataError(f"{rec.meta.source}: no channel named {c!r}")
            idx.append(rec.channel_names.index(c))
        else:
            if not 0 <= int(c) < rec.n_channels:
                raise DataError(f"{rec.meta.source}: channel index {c} out of range")
            idx.append(int(c))
    return rec.select_channels(idx)


def pooled(subjects: Sequence[SubjectData]) -> SubjectData:
    names = subjects[0].channel_names
    if any(s.channel_names != names for s in subjects):
        raise DataError("recordings disagree on channel names")
    return SubjectData("pooled", np.concatenate([s.graphs for s in subjects]),
                       np.concatenate([s.bands for s in subjects]), np.concatenate([s.labels for s in subjects]),
                       np.concatenate([s.sessions for s in subjects]), names, subjects[0].sample_rate)


def single_subject(rec: Recording, pipeline: PipelineConfig) -> SubjectData:
    ws, graphs, bands = prepare_recording(rec, pipeline)
    labels = ws.labels if ws.labels is not None else np.zeros(len(ws), dtype=np.int64)
    return SubjectData(rec.meta.subject or "input", graphs, bands, np.asarray(labels),
                       np.full(len(ws), rec.meta.session or "0", dtype=object), rec.channel_names, rec.sample_rate)


def _pipeline_dict(p: PipelineConfig) -> dict:
    return {
        "filter": {"high_pass_hz": p.high_pass_hz, "low_pass_hz": p.low_pass_hz},
        "window": {"seconds": p.window_seconds, "overlap_seconds": p.overlap_seconds},
        "bands": [[b.name, b.low, b.high] for b in p.band_set.bands],
        "psd": asdict(p.psd),
    }


def _pipeline_from(d: dict) -> PipelineConfig:
    return PipelineConfig(d["filter"]["high_pass_hz"], d["filter"]["low_pass_hz"], d["window"]["seconds"],
                          d["window"]["overlap_seconds"], band_set_from_spec(d["bands"]), PsdParams(**d["psd"]))


# --------------------------------------------------------------------------- output helpers


def _out_dir(cfg: Config) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    return cfg.output_dir


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}")


def _rows_csv(header: Sequence[str], rows, config_hash_: str) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={config_hash_}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _print_report(report: Report) -> None:
    for fs, exp, subj, setting, n, mean, se in report.rows():
        print(f"{exp} {fs} {setting} {subj}: mean={mean:.4f} se={se:.4f} n_seeds={n}")


def _write_report(report: Report, out: Path, name: str) -> None:
    _write(out / f"{name}.csv", report.to_csv())
    _write(out / f"{name}.json", dump_json(report.to_json()))
    _write(out / f"{name}_plot.csv", plot_csv(report.plot_rows(), report.config_hash))


def _fmt(x: float) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------- commands


def cmd_ingest(args, cfg: Config) -> None:
    recs = read_manifest(cfg)
    summary = []
    for r in recs:
        row = {
            "source": r.meta.source, "subject": r.meta.subject, "session": r.meta.session, "label": r.meta.label,
            "n_channels": r.n_channels, "n_samples": r.n_samples, "sample_rate_hz": r.sample_rate,
            "channels": list(r.channel_names),
        }
        summary.append(row)
        print(f"{r.meta.source}: {r.n_channels} channels, {r.n_samples} samples @ {r.sample_rate:g} Hz")
    _write(_out_dir(cfg) / "ingest.json", dump_json({"config_hash": cfg.hash, "recordings": summary}))


def cmd_features(args, cfg: Config) -> None:
    subjects = prepare_subjects(read_manifest(cfg), cfg.pipeline)
    data = pooled(subjects)
    subj = np.concatenate([np.full(len(s), s.subject) for s in subjects])
    path = _out_dir(cfg) / "features.npz"
    np.savez(path, graphs=data.graphs, bands=data.bands, labels=data.labels, subjects=subj.astype(str),
             sessions=data.sessions.astype(str), config_hash=np.array(cfg.hash))
    print(f"wrote {path}: {len(data)} windows, {data.n_channels} channels, {data.bands.shape[2]} bands")


def _feature_set(name: str) -> str:
    for fs in FEATURE_SETS:
        if fs.lower() == name.lower():
            return fs
    raise ConfigError(f"unknown feature set {name!r}; choose from {', '.join(FEATURE_SETS)}")


def cmd_fit(args, cfg: Config) -> None:
    fs = _feature_set(args.features)
    data = pooled(prepare_subjects(read_manifest(cfg), cfg.pipeline))
    maps, x = fit_feature_maps(data, np.arange(len(data)), [fs])
    bundle = {"feature_set": fs, "pipeline": _pipeline_dict(cfg.pipeline), "channel_names": list(data.channel_names),
              "sample_rate_hz": data.sample_rate}
    if maps.tsg is not None:
        bundle["tsg"] = maps.tsg
    if maps.bf is not None:
        bundle["bf"] = maps.bf
    if np.unique(data.labels).size == 2:
        bundle["forest"] = train(x[fs], data.labels, cfg.forest, cfg.experiment.seed)
    path = Path(args.output) if args.output else _out_dir(cfg) / f"{fs.lower()}.model"
    path.parent.mkdir(parents=True, exist_ok=True)
    artifact.save(path, bundle, cfg.hash)
    print(f"wrote {path}: {fs} on {len(data)} windows, d={x[fs].shape[1]}, forest={'forest' in bundle}")


def _load_bundle(path: str) -> tuple[dict, dict]:
    try:
        obj, header = artifact.load(path)
    except FileNotFoundError as exc:
        raise DataError(f"model not found: {path}") from exc
    if header["kind"] == "tsg-model":
        obj = {"feature_set": "TSG", "tsg": obj}
    elif header["kind"] == "bf-model":
        obj = {"feature_set": "BF", "bf": obj}
    elif header["kind"] != "bundle":
        raise DataError(f"{path}: expected a feature model or bundle, got {header['kind']}")
    return obj, header


def _bundle_features(bundle: dict, rec: Recording, pipeline: Optional[PipelineConfig]) -> np.ndarray:
    if "pipeline" in bundle:
        pipeline = _pipeline_from(bundle["pipeline"])
    names = bundle.get("channel_names")
    if names and tuple(names) != rec.channel_names and set(names) <= set(rec.channel_names):
        rec = select_channels(rec, names)
    data = single_subject(rec, pipeline)
    maps = _feature_maps(bundle)
    return transform(maps, data, np.arange(len(data)), [bundle["feature_set"]])[bundle["feature_set"]], data


def _feature_maps(bundle: dict) -> FeatureMaps:
    return FeatureMaps(bundle.get("tsg"), bundle.get("bf"), None)


def _input_recording(args, cfg: Optional[Config]) -> Recording:
    rate = cfg.csv_sample_rate if cfg is not None else args.csv_sample_rate
    rec = read_recording(Path(args.input), RecordingMeta(source=str(args.input)), rate)
    return select_channels(rec, cfg.channels if cfg is not None else None)


def _default_output(args, cfg: Optional[Config], suffix: str) -> Path:
    if args.output:
        return Path(args.output)
    base = cfg.output_dir if cfg is not None else Path(args.input).parent
    return base / f"{Path(args.input).stem}.{suffix}.csv"


def cmd_embed(args, cfg: Optional[Config]) -> None:
    bundle, header = _load_bundle(args.model)
    x, _ = _bundle_features(bundle, _input_recording(args, cfg), cfg.pipeline if cfg else PipelineConfig())
    rows = [[i, *map(_fmt, row)] for i, row in enumerate(x)]
    header_cols = ["window"] + [f"z{j + 1}" for j in range(x.shape[1])]
    _write(_default_output(args, cfg, "embedding"), _rows_csv(header_cols, rows, header["config_hash"]))
    print(f"{x.shape[0]} windows embedded, d={x.shape[1]}")


def cmd_predict(args, cfg: Optional[Config]) -> None:
    bundle, header = _load_bundle(args.model)
    if "forest" not in bundle:
        raise DataError(f"{args.model} holds no trained forest")
    x, _ = _bundle_features(bundle, _input_recording(args, cfg), cfg.pipeline if cfg else PipelineConfig())
    post = predict_posterior(bundle["forest"], x)
    pred = predict(bundle["forest"], x)
    rows = [[i, _fmt(p), c] for i, (p, c) in enumerate(zip(post, pred))]
    _write(_default_output(args, cfg, "predictions"), _rows_csv(["window", "posterior", "prediction"], rows,
                                                                header["config_hash"]))
    print(f"{len(pred)} windows: {int(np.sum(pred == bundle['forest'].classes[1]))} predicted positive")


def cmd_finetune(args, cfg: Config) -> None:
    bundle, header = _load_bundle(args.model)
    if "forest" not in bundle:
        raise DataError(f"{args.model} holds no trained forest")
    fs = bundle["feature_set"]
    data = pooled(prepare_subjects(read_manifest(cfg), _pipeline_from(bundle["pipeline"])))
    x = transform(_feature_maps(bundle), data, np.arange(len(data)), [fs])[fs]
    bundle = dict(bundle, forest=fine_tune(bundle["forest"], x, data.labels))
    path = Path(args.output) if args.output else _out_dir(cfg) / f"{Path(args.model).stem}.finetuned.model"
    path.parent.mkdir(parents=True, exist_ok=True)
    artifact.save(path, bundle, header["config_hash"])
    print(f"wrote {path}: leaf posteriors refit on {len(data)} windows")


def cmd_experiment(args, cfg: Config) -> None:
    subjects = prepare_subjects(read_manifest(cfg), cfg.pipeline)
    ecfg = cfg.experiment
    out = _out_dir(cfg)
    if args.protocol == "in-session":
        report = run_in_session(ecfg, subjects, jobs=args.jobs)
        _write(out / "in-session_histogram.csv",
               _rows_csv(["feature_set", "subject", "mean"],
                         [[fs, s, _fmt(report.cell(fs, s, report.extra["histogram"]["setting"]).value)]
                          for fs in report.feature_sets() for s in report.subjects()], report.config_hash))
    elif args.protocol == "querying":
        report = run_nonconstant_querying(ecfg, subjects, jobs=args.jobs)
    elif args.protocol == "transfer":
        report = run_transfer(ecfg, subjects, jobs=args.jobs)
    else:
        sr = run_subset_search(ecfg, subjects, jobs=args.jobs)
        _write_subsets(sr, ecfg, out)
        return
    _write_report(report, out, report.experiment)
    _print_report(report)


def _write_subsets(sr: SubsetReport, ecfg: ExperimentConfig, out: Path) -> None:
    report = sr.to_report()
    _write(out / "subsets.csv", report.to_csv())
    _write(out / "subsets.json", dump_json(sr.to_json()))
    _write(out / "subsets_plot.csv", plot_csv(size_summary_rows(sr), sr.config_hash,
                                              ("feature_set", "size", "mean", "p5", "p95")))
    rows = []
    for fs in sr.scores:
        for k, n, m, lo, hi in sr.size_summary(fs):
            print(f"subsets {fs} size={k} n_subsets={n}: mean={m:.4f} p5={lo:.4f} p95={hi:.4f}")
        for sizes in (None, tuple(ecfg.importance_sizes)):
            usable = sizes is None or any(len(s) in sizes for s in sr.subsets)
            if not usable:
                continue
            imp = channel_importance(sr, fs, sizes)
            tag = "all" if sizes is None else "-".join(map(str, sizes))
            for c in imp.ranked_channels():
                rows.append([fs, tag, "channel", sr.channel_names[sorted(sr.channels).index(c)], c,
                             imp.channel_ranks[c], _fmt(imp.channel_scores[c])])
            for a, b in imp.ranked_pairs():
                rows.append([fs, tag, "pair", "", f"{a}-{b}", imp.pair_ranks[(a, b)], _fmt(imp.pair_scores[(a, b)])])
            top = imp.ranked_channels()[:3]
            print(f"importance {fs} sizes={tag}: top channels {top}, top pair {imp.ranked_pairs()[0]}")
    _write(out / "subsets_importance.csv",
           _rows_csv(["feature_set", "sizes", "kind", "name", "index", "rank", "score"], rows, sr.config_hash))


def cmd_synth(args, cfg: Config) -> None:
    s = cfg.synth
    n_c = int(s.get("n_channels", 8))
    gen = s.get("generator", "correlation")
    band_set = cfg.pipeline.band_set
    try:
        if gen == "identical":
            specs = synth_mod.identical_specs(n_c, band_set)
        elif gen == "correlation":
            specs = synth_mod.correlation_only_specs(n_c, band_set)
        elif gen == "band":
            specs = synth_mod.band_only_specs(n_c, band_set, gain=float(s.get("gain", 3.0)))
        else:
            specs = synth_mod.planted_pair_specs(n_c, tuple(s.get("pair", (3, 4))), float(s.get("rho", 0.8)),
                                                 band_set)
        recs = synth_mod.synth_dataset(int(s.get("n_subjects", 4)), n_c, float(s.get("sample_rate_hz", 128.0)), specs,
                                       seed=int(s.get("seed", 0)), duration_s=float(s.get("duration_s", 60.0)),
                                       n_sessions=int(s.get("n_sessions", 1)), band_set=band_set,
                                       amplitude_uv=float(s.get("amplitude_uv", 20.0)))
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"synth: {exc}") from exc
    out = _out_dir(cfg)
    data_dir = out / "synth"
    data_dir.mkdir(parents=True, exist_ok=True)
    manifest = []
    for r in recs:
        name = f"{r.meta.subject}_s{r.meta.session}_c{r.meta.label}.edf"
        (data_dir / name).write_bytes(write_edf(r))
        manifest.append({"path": f"synth/{name}", "subject": r.meta.subject, "session": r.meta.session,
                         "label": r.meta.label})
    _write(out / "manifest.json", json.dumps(manifest, indent=2))
    print(f"{len(recs)} recordings ({gen} generator, {n_c} channels) in {data_dir}")


def cmd_report(args, cfg: Optional[Config]) -> None:
    path = Path(args.input)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise DataError(f"report not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc
    if "subsets" in data and "scores" in data:
        sr = SubsetReport.from_json(data)
        out = Path(args.output) if args.output else path.with_suffix(".csv")
        _write(out, sr.to_report().to_csv())
        for fs in sr.scores:
            for k, n, m, lo, hi in sr.size_summary(fs):
                print(f"subsets {fs} size={k} n_subsets={n}: mean={m:.4f} p5={lo:.4f} p95={hi:.4f}")
        return
    try:
        report = Report.from_json(data)
    except (KeyError, TypeError) as exc:
        raise DataError(f"{path}: not a report ({exc})") from exc
    out = Path(args.output) if args.output else path.with_suffix(".csv")
    _write(out, report.to_csv())
    _print_report(report)


# --------------------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsgeeg", description="Graph and band-power features for EEG workload "
                                                                "classification.")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes for experiments (default: available CPUs)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, config_required=True):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=config_required, help="JSON configuration file")
        return p

    add("ingest", "parse and validate every manifest recording")
    add("features", "write per-window correlation graphs and band masses")
    p = add("fit", "fit a feature map (and a forest when labels allow) on the manifest")
    p.add_argument("--features", required=True, help="TSG, BF or TSG+BF")
    p.add_argument("--output", help="model file (default: <output_dir>/<features>.model)")
    for name, help_ in (("embed", "embed the windows of a recording"), ("predict", "classify the windows of a recording")):
        p = add(name, help_, config_required=False)
        p.add_argument("--model", required=True)
        p.add_argument("--input", required=True, help="EDF or CSV recording")
        p.add_argument("--output")
        p.add_argument("--csv-sample-rate", type=float, help="sample rate for CSV input without a config")
    p = add("finetune", "refit a model's leaf posteriors on the manifest recordings")
    p.add_argument("--model", required=True)
    p.add_argument("--output")
    p = add("experiment", "run an evaluation protocol")
    p.add_argument("protocol", choices=("in-session", "querying", "transfer", "subsets"))
    add("synth", "generate a synthetic dataset and manifest")
    p = add("report", "rewrite a JSON report as CSV and print its cells", config_required=False)
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    return parser


COMMANDS = {
    "ingest": cmd_ingest, "features": cmd_features, "fit": cmd_fit, "embed": cmd_embed, "predict": cmd_predict,
    "finetune": cmd_finetune, "experiment": cmd_experiment, "synth": cmd_synth, "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if getattr(args, "config", None) else None
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (DataError, artifact.ArtifactError, OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
