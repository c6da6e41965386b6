import csv
import hashlib
import json
import os

import numpy as np
import pytest

from distortbench.buffers import ImageBuffer
from distortbench.cli import main
from distortbench.ingest import ManifestEntry, read_manifest, save_png, write_manifest
from distortbench.spectral import load_spectrum
from distortbench.taxonomy import CATEGORIES
from distortbench.trials import CSV_HEADER, read_trials

from conftest import synthetic_natural


def build_corpus(tmp_path, per_category=1, side=300, name="corpus"):
    root = tmp_path / name
    root.mkdir(exist_ok=True)
    entries = []
    i = 0
    for category in CATEGORIES:
        for k in range(per_category):
            image_id = f"{category}-{k:02d}"
            path = root / f"{image_id}.png"
            save_png(synthetic_natural(side, seed=900 + i, channels=3), path)
            entries.append(ManifestEntry(image_id, str(path), category))
            i += 1
    manifest = root / "manifest.jsonl"
    write_manifest(entries, manifest)
    return manifest


def sha(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def test_ingest_command(tmp_path):
    manifest = build_corpus(tmp_path)
    out_dir = tmp_path / "processed"
    assert main(["ingest", "--in", str(manifest), "--out-dir", str(out_dir), "--side", "64"]) == 0
    kept = read_manifest(out_dir / "manifest.jsonl")
    assert len(kept) == 16
    stats = json.loads((out_dir / "stats.json").read_text())
    assert 0.0 < stats["mean_grey"] < 1.0
    assert (out_dir / "exclusions.jsonl").exists()


def test_distort_determinism(tmp_path):
    manifest = build_corpus(tmp_path)
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"kind": "uniform-noise", "w": 0.35}))
    digests = []
    for name in ("out-a", "out-b"):
        out = tmp_path / name
        code = main(
            [
                "distort",
                "--spec",
                str(spec_path),
                "--seed",
                "77",
                "--in",
                str(manifest),
                "--out",
                str(out),
                "--side",
                "64",
            ]
        )
        assert code == 0
        files = sorted(os.listdir(out))
        digests.append([sha(out / f) for f in files])
    assert digests[0] == digests[1]


def test_distort_sidecar_provenance(tmp_path):
    manifest = build_corpus(tmp_path)
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"kind": "salt-pepper", "p": 0.5}))
    out = tmp_path / "out"
    main(["distort", "--spec", str(spec_path), "--seed", "3", "--in", str(manifest), "--out", str(out), "--side", "64"])
    sidecar = json.loads((out / "airplane-00.json").read_text())
    assert sidecar["spec"]["kind"] == "salt-pepper"
    assert sidecar["provenance"]["experiment_seed"] == 3
    assert "clip_fraction" in sidecar["provenance"]
    assert sidecar["provenance"]["rng"].startswith("philox4x64")


def test_spectrum_mean_command(tmp_path):
    manifest = build_corpus(tmp_path)
    out = tmp_path / "spectrum.bin"
    assert main(["spectrum", "mean", "--in", str(manifest), "--out", str(out), "--side", "64"]) == 0
    mas = load_spectrum(out)
    assert mas.amplitudes.shape == (64, 64)
    assert mas.sample_count == 16


def test_evaluate_and_analyze_pipeline(tmp_path):
    manifest = build_corpus(tmp_path)
    labels = [f"fine-{c}" for c in CATEGORIES] + [f"pad-{i}" for i in range(4)]
    labels_path = tmp_path / "labels.txt"
    labels_path.write_text("\n".join(labels) + "\n")
    map_path = tmp_path / "map.tsv"
    map_path.write_text("".join(f"fine-{c}\t{c}\n" for c in CATEGORIES))

    config = {
        "name": "toy",
        "family": "uniform-noise",
        "conditions": ["0", "0.2"],
        "trials_per_cell": 1,
        "block_size": 32,
        "practice_total": 0,
        "practice_blocks": 0,
        "side": 64,
        "enhanced_mask": False,
        "refresh_hz": 60.0,
        "seed": 0,
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config))

    adapter_path = tmp_path / "scores.csv"
    with open(adapter_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "condition"] + [f"score_{i}" for i in range(20)])
        for entry in read_manifest(manifest):
            for condition in ("0", "0.2"):
                scores = [0.0] * 20
                scores[labels.index(f"fine-{entry.category}")] = 1.0
                writer.writerow([entry.image_id, condition] + [f"{s:g}" for s in scores])

    out_csv = tmp_path / "raw.csv"
    args = [
        "evaluate",
        "--config",
        str(config_path),
        "--adapter-csv",
        str(adapter_path),
        "--labels",
        str(labels_path),
        "--map",
        str(map_path),
        "--corpus",
        str(manifest),
        "--seed",
        "5",
        "--out",
        str(out_csv),
    ]
    assert main(args) == 0
    rows = read_trials(out_csv)
    assert len(rows) == 32 and all(r.is_correct for r in rows)

    # identical seeds -> byte-identical CSV
    out_b = tmp_path / "raw-b.csv"
    assert main(args[:-1] + [str(out_b)]) == 0
    assert out_csv.read_bytes() == out_b.read_bytes()

    report_dir = tmp_path / "report"
    assert main(["analyze", "--trials", str(out_csv), "--out-dir", str(report_dir)]) == 0
    report = json.loads((report_dir / "report.json").read_text())
    assert report["conditions"]["0"]["accuracy"]["mean"] == 1.0
    assert (report_dir / "confusion_0.csv").exists()
    assert (report_dir / "long.csv").exists()
    long_lines = (report_dir / "long.csv").read_text().strip().splitlines()
    assert long_lines[0] == "condition,metric,subject_or_run,value"


def test_augment_sample_command(tmp_path):
    out = tmp_path / "samples.csv"
    assert main(["augment-sample", "--seed", "4", "-n", "500", "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "manipulation,level"
    assert len(lines) == 501
    names = {l.split(",")[0] for l in lines[1:]}
    assert "unperturbed" in names


def test_export_config_commands(tmp_path):
    out = tmp_path / "uniform.json"
    assert main(["export-config", "--preset", "uniform-noise", "--out", str(out)]) == 0
    cfg = json.loads(out.read_text())
    assert cfg["trials_per_cell"] == 10 and cfg["block_size"] == 256

    sched = tmp_path / "train.json"
    assert main(["export-config", "--training-epochs", "200", "--out", str(sched)]) == 0
    assert json.loads(sched.read_text())["lr_decay_epochs"] == [60, 120, 160, 180]


def test_distort_rejects_off_grid_without_flag(tmp_path):
    manifest = build_corpus(tmp_path)
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps({"kind": "uniform-noise", "w": 0.47}))
    with pytest.raises(Exception):
        main(["distort", "--spec", str(spec_path), "--seed", "1", "--in", str(manifest), "--out", str(tmp_path / "x"), "--side", "64"])
    assert (
        main(
            [
                "distort",
                "--spec",
                str(spec_path),
                "--seed",
                "1",
                "--in",
                str(manifest),
                "--out",
                str(tmp_path / "y"),
                "--side",
                "64",
                "--allow-off-grid",
            ]
        )
        == 0
    )
