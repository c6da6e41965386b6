"""Command-line entry points: ingest, distort, spectrum, evaluate, analyze, serve."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .distortions import DistortionContext, apply_distortion, spec_from_json, stream_seed
from .harness import (
    PRESETS,
    AugmentationPolicy,
    ExperimentConfig,
    PrecomputedAdapter,
    default_augmentation_policy,
    run_model_experiment,
    sample_augmentation,
    training_config_preset,
)
from .ingest import (
    IngestRules,
    ManifestEntry,
    ensure_dir,
    ingest_corpus,
    load_image,
    read_manifest,
    save_png,
    save_stats,
    write_exclusion_report,
    write_manifest,
)
from .metrics import analyze, confusion_matrix, write_confusion_csv, write_long_csv, write_report_json
from .pixels import preprocess, to_greyscale
from .rng import sequence_generator
from .spectral import load_spectrum, mean_amplitude_spectrum, save_spectrum
from .taxonomy import load_category_map, load_labels
from .trials import read_trials


def _load_config(spec: str) -> ExperimentConfig:
    if spec in PRESETS:
        return PRESETS[spec]
    with open(spec, encoding="utf-8") as fh:
        cfg = ExperimentConfig.from_json(json.load(fh))
    cfg.validate()
    return cfg


def _cmd_ingest(args) -> int:
    manifest = read_manifest(args.manifest)
    rules = IngestRules(min_side=args.min_side, mean_sd_limit=args.sd_limit, target_side=args.side)
    result, retained_manifest = ingest_corpus(manifest, rules)
    ensure_dir(args.out_dir)
    out_entries = []
    for image_id, img in result.retained:
        path = os.path.join(args.out_dir, f"{image_id}.png")
        save_png(img, path)
        entry = next(e for e in retained_manifest if e.image_id == image_id)
        out_entries.append(ManifestEntry(image_id, path, entry.category))
    write_manifest(out_entries, os.path.join(args.out_dir, "manifest.jsonl"))
    write_exclusion_report(result.excluded, os.path.join(args.out_dir, "exclusions.jsonl"))
    if result.stats:
        save_stats(result.stats, os.path.join(args.out_dir, "stats.json"))
    print(f"retained {len(result.retained)}, excluded {len(result.excluded)}")
    return 0


def _cmd_distort(args) -> int:
    with open(args.spec, encoding="utf-8") as fh:
        spec = spec_from_json(json.load(fh))
    context = DistortionContext(allow_off_grid=args.allow_off_grid)
    if args.stats:
        from .ingest import load_stats

        context.mean_grey = load_stats(args.stats).mean_grey
    if args.spectrum:
        context.amplitude_target = load_spectrum(args.spectrum)
    ensure_dir(args.out)
    for entry in read_manifest(args.manifest):
        img = preprocess(load_image(entry.path), args.side)
        seed = stream_seed(args.seed, entry.image_id, spec)
        out = apply_distortion(img, spec, seed, context)
        save_png(out, os.path.join(args.out, f"{entry.image_id}.png"))
        sidecar = {
            "image_id": entry.image_id,
            "category": entry.category,
            "spec": out.meta.get("distortion"),
            "side": args.side,
            "provenance": {k: v for k, v in out.meta.items() if k != "distortion"},
            "toolkit_version": __version__,
        }
        with open(os.path.join(args.out, f"{entry.image_id}.json"), "w", encoding="utf-8") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
    return 0


def _cmd_spectrum_mean(args) -> int:
    images = []
    for entry in read_manifest(args.manifest):
        img = preprocess(load_image(entry.path), args.side)
        if img.channels == 3:
            img = to_greyscale(img)
        images.append((entry.image_id, img))
    save_spectrum(mean_amplitude_spectrum(images), args.out)
    print(f"averaged {len(images)} spectra -> {args.out}")
    return 0


def _cmd_analyze(args) -> int:
    rows = read_trials(args.trials)
    ensure_dir(args.out_dir)
    report = analyze(rows)
    write_report_json(report, os.path.join(args.out_dir, "report.json"))
    main_rows = [r for r in rows if not r.is_practice]
    for condition in report["conditions"]:
        safe = condition.replace("/", "_")
        write_confusion_csv(
            confusion_matrix(main_rows, condition),
            os.path.join(args.out_dir, f"confusion_{safe}.csv"),
        )
    write_long_csv(main_rows, os.path.join(args.out_dir, "long.csv"))
    print(f"report for {len(rows)} rows -> {args.out_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    config = _load_config(args.config).with_seed(args.seed)
    labels = load_labels(args.labels)
    cmap = load_category_map(args.map, labels)
    adapter = PrecomputedAdapter(args.adapter_csv, n_scores=len(labels))
    corpus = read_manifest(args.corpus)
    report = run_model_experiment(config, adapter, corpus, cmap, args.out, run_id=args.run_id)
    print(json.dumps(report, sort_keys=True))
    return 0 if report["finished"] else 1


def _cmd_augment_sample(args) -> int:
    if args.policy == "default":
        policy = default_augmentation_policy(exclude=args.exclude)
    else:
        with open(args.policy, encoding="utf-8") as fh:
            rec = json.load(fh)
        policy = AugmentationPolicy(tuple((n, tuple(lv)) for n, lv in rec["manipulations"]))
    rng = sequence_generator(args.seed, "augment-sample")
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["manipulation", "level"])
        for _ in range(args.n):
            name, level = sample_augmentation(policy, rng)
            writer.writerow([name, "" if level is None else level])
    return 0


def _cmd_export_config(args) -> int:
    if args.training_epochs:
        payload = training_config_preset(args.training_epochs)
    else:
        payload = PRESETS[args.preset].to_json()
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(
        args.corpus,
        args.data_dir,
        stats_path=args.stats,
        spectrum_path=args.spectrum,
        monitor_path=args.monitor,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="distortbench")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="filter and preprocess a corpus")
    p.add_argument("--in", dest="manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--side", type=int, default=256)
    p.add_argument("--min-side", type=int, default=256)
    p.add_argument("--sd-limit", type=float, default=2.0)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("distort", help="apply one distortion spec to a corpus")
    p.add_argument("--spec", required=True, help="JSON file mirroring the DistortionSpec")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--in", dest="manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--side", type=int, default=256)
    p.add_argument("--stats", help="stats.json from ingest (sets mean grey)")
    p.add_argument("--spectrum", help="mean amplitude spectrum file (power-equalise)")
    p.add_argument("--allow-off-grid", action="store_true")
    p.set_defaults(func=_cmd_distort)

    p = sub.add_parser("spectrum", help="spectral corpus statistics")
    spectrum_sub = p.add_subparsers(dest="spectrum_command", required=True)
    pm = spectrum_sub.add_parser("mean", help="mean amplitude spectrum over a corpus")
    pm.add_argument("--in", dest="manifest", required=True)
    pm.add_argument("--out", required=True)
    pm.add_argument("--side", type=int, default=256)
    pm.set_defaults(func=_cmd_spectrum_mean)

    p = sub.add_parser("analyze", help="metrics report from a raw-trial CSV")
    p.add_argument("--trials", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("evaluate", help="run a model experiment via a precomputed adapter")
    p.add_argument("--config", required=True, help="preset name or config JSON path")
    p.add_argument("--adapter-csv", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--run-id", default="model")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("augment-sample", help="draw training augmentation assignments")
    p.add_argument("--policy", default="default", help="'default' or a policy JSON path")
    p.add_argument("--exclude", nargs="*", default=[])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-n", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_augment_sample)

    p = sub.add_parser("export-config", help="write preset experiment/training configs")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", choices=sorted(PRESETS))
    group.add_argument("--training-epochs", type=int, choices=(100, 200))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_config)

    p = sub.add_parser("serve", help="run the session HTTP API")
    p.add_argument("--corpus", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--stats")
    p.add_argument("--spectrum")
    p.add_argument("--monitor")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
