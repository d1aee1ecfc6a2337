import json
import math
import subprocess
import sys

import numpy as np
import pytest

from tsgeeg import artifact
from tsgeeg.cli import bundled_config, load_config, main
from tsgeeg.signal import parse_edf, write_edf, Recording, RecordingMeta


def write_config(tmp_path, **over):
    cfg = {
        "manifest": "out/manifest.json",
        "window": {"seconds": 2.5, "overlap_seconds": 0.0},
        "forest": {"n_trees": 15},
        "experiment": {"fractions": [0.8], "ratios": [0.5, 1.0], "splits": 4, "seed": 7,
                       "finetune_fractions": [0.0, 0.2], "subset_splits": 2, "channels": [0, 1, 2],
                       "importance_sizes": [2]},
        "synth": {"n_subjects": 2, "n_channels": 4, "sample_rate_hz": 128.0, "duration_s": 30.0,
                  "n_sessions": 2, "generator": "identical", "seed": 1},
        "output_dir": "out",
    }
    cfg.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def run(*argv):
    return main(["--jobs", "1", *map(str, argv)])


@pytest.fixture
def synth_cfg(tmp_path):
    path = write_config(tmp_path)
    assert run("synth", "--config", path) == 0
    return path


def body(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


# --------------------------------------------------------------------------- configuration


def test_unknown_key_exit_1(tmp_path, capsys):
    path = write_config(tmp_path, bogus=1)
    assert run("ingest", "--config", path) == 1
    assert "bogus" in capsys.readouterr().err


def test_unknown_nested_key_listed(tmp_path, capsys):
    path = write_config(tmp_path, filter={"high_pass": 0.5})
    assert run("ingest", "--config", path) == 1
    assert "filter.high_pass" in capsys.readouterr().err
    path = write_config(tmp_path, forest={"trees": 3})
    assert run("ingest", "--config", path) == 1
    assert "forest.trees" in capsys.readouterr().err


def test_invalid_value_exit_1(tmp_path):
    assert run("ingest", "--config", write_config(tmp_path, experiment={"fractions": [1.5]})) == 1
    (tmp_path / "bad.json").write_text("{nope")
    assert run("ingest", "--config", tmp_path / "bad.json") == 1


def test_missing_files_exit_2(tmp_path, capsys):
    assert run("ingest", "--config", tmp_path / "absent.json") == 2
    path = write_config(tmp_path)
    assert run("ingest", "--config", path) == 2
    assert "manifest.json" in capsys.readouterr().err
    (tmp_path / "out").mkdir()
    (tmp_path / "out" / "manifest.json").write_text(json.dumps([{"path": "gone.edf", "label": 0}]))
    assert run("ingest", "--config", path) == 2
    assert "gone.edf" in capsys.readouterr().err


def test_bundled_configs_load():
    mm = load_config(str(bundled_config("mental-math.json")))
    assert mm.pipeline.window_seconds == 2.5 and mm.pipeline.high_pass_hz == 0.5 and mm.pipeline.low_pass_hz == 30.0
    assert len(mm.pipeline.band_set) == 8 and len(mm.channels) == 19
    matb = load_config(str(bundled_config("matb-synth.json")))
    assert matb.pipeline.window_seconds == 10.0 and matb.synth["n_channels"] == 24


# --------------------------------------------------------------------------- pipeline


def test_synth_then_in_session_is_chance(synth_cfg, capsys):
    out = synth_cfg.parent / "out"
    assert len(json.loads((out / "manifest.json").read_text())) == 2 * 2 * 2
    assert run("experiment", "in-session", "--config", synth_cfg) == 0
    text = capsys.readouterr().out
    assert "in-session TSG p=0.8 ALL" in text
    lines = body(out / "in-session.csv")
    assert lines[0] == "feature_set,experiment,subject,setting,n_seeds,mean,stderr"
    means = {r.split(",")[0]: float(r.split(",")[5]) for r in lines[1:] if r.split(",")[2] == "ALL"}
    assert set(means) == {"TSG", "BF", "TSG+BF"}
    for m in means.values():
        assert 0.25 <= m <= 0.75
    for name in ("in-session.json", "in-session_plot.csv", "in-session_histogram.csv"):
        assert (out / name).exists()


def test_outputs_embed_hash_and_rerun_identical(synth_cfg):
    out = synth_cfg.parent / "out"
    h = load_config(str(synth_cfg)).hash
    bodies = {}
    for attempt in range(2):
        for proto in ("in-session", "querying", "transfer", "subsets"):
            assert run("experiment", proto, "--config", synth_cfg) == 0
        for name in ("in-session", "querying", "transfer-subject", "subsets"):
            lines = body(out / f"{name}.csv")
            bodies.setdefault(name, []).append(lines)
    for name, (a, b) in bodies.items():
        assert a == b, name
    for csv_file in out.glob("*.csv"):
        assert csv_file.read_text().startswith("# config_hash="), csv_file
    for json_file in ("in-session.json", "querying.json", "transfer-subject.json", "subsets.json"):
        assert json.loads((out / json_file).read_text())["config_hash"]
    assert (out / "subsets_importance.csv").exists()
    assert run("report", "--input", out / "in-session.json", "--output", out / "again.csv") == 0
    assert body(out / "again.csv") == body(out / "in-session.csv")
    exp_hash = json.loads((out / "in-session.json").read_text())["config_hash"]
    assert exp_hash == load_config(str(synth_cfg)).experiment.hash()
    assert h != exp_hash  # file-level hash covers the whole config


def test_fit_embed_window_count(synth_cfg, tmp_path):
    out = synth_cfg.parent / "out"
    assert run("features", "--config", synth_cfg) == 0
    with np.load(out / "features.npz") as f:
        assert f["graphs"].shape[1:] == (4, 4) and str(f["config_hash"]) == load_config(str(synth_cfg)).hash
    assert run("fit", "--features", "tsg", "--config", synth_cfg) == 0
    model, header = artifact.load(out / "tsg.model")
    assert header["config_hash"] == load_config(str(synth_cfg)).hash
    d = model["tsg"].d

    rng = np.random.default_rng(3)
    fs, t = 128.0, 4321
    new = Recording(rng.normal(0, 20, (4, t)), fs, ("C1", "C2", "C3", "C4"), RecordingMeta(subject="new"))
    (tmp_path / "new.edf").write_bytes(write_edf(new))
    w = int(round(2.5 * fs))
    assert run("embed", "--model", out / "tsg.model", "--input", tmp_path / "new.edf") == 0
    lines = body(tmp_path / "new.embedding.csv")  # written next to the input without a config
    assert len(lines) - 1 == math.floor(t / w)
    assert lines[0].split(",") == ["window"] + [f"z{j + 1}" for j in range(d)]

    assert run("predict", "--model", out / "tsg.model", "--input", tmp_path / "new.edf",
               "--output", tmp_path / "pred.csv") == 0
    assert len(body(tmp_path / "pred.csv")) - 1 == math.floor(t / w)
    assert run("finetune", "--model", out / "tsg.model", "--config", synth_cfg) == 0
    tuned, _ = artifact.load(out / "tsg.finetuned.model")
    assert tuned["forest"].structure_hash() == model["forest"].structure_hash()


def test_embed_rejects_corrupt_model(tmp_path):
    (tmp_path / "m.model").write_text(json.dumps({"format": "tsgeeg-artifact", "version": 99, "kind": "bundle"}))
    (tmp_path / "x.csv").write_text("a,b\n1,2\n")
    assert run("embed", "--model", tmp_path / "m.model", "--input", tmp_path / "x.csv",
               "--csv-sample-rate", "100") == 2


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "tsgeeg.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "experiment" in res.stdout
