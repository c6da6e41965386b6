"""End-to-end model benchmark on a synthetic corpus.

Generates a small labelled corpus, ingests it (exclusion rules + stats),
fabricates a precomputed adapter whose accuracy decays with noise level, runs
the evaluation harness across a condition grid, and analyzes the resulting
raw-trial CSV. Also shows the seven-run error-bar partition and the training
helpers (augmentation sampling, class weights, schedule presets).
"""

import csv
import json
import os
import tempfile

import numpy as np

from distortbench.harness import (
    ExperimentConfig,
    PrecomputedAdapter,
    class_weights,
    default_augmentation_policy,
    run_model_experiment,
    sample_augmentation,
    training_config_preset,
)
from distortbench.ingest import ManifestEntry, ingest_filter, save_png, write_manifest
from distortbench.metrics import analyze, seven_run_partition
from distortbench.rng import sequence_generator
from distortbench.taxonomy import CATEGORIES, CategoryMap
from distortbench.trials import read_trials
from distortbench.buffers import ImageBuffer

work = tempfile.mkdtemp(prefix="distortbench-demo-")
print(f"working in {work}")

# --- a synthetic corpus: 4 images per category, one deliberately overexposed
rng = np.random.default_rng(3)
raw_images = []
for c_idx, category in enumerate(CATEGORIES):
    for k in range(4):
        base = 0.25 + 0.1 * rng.random() + 0.4 * rng.random((320, 320, 3))
        if category == "oven" and k == 3:
            base = base * 0.05 + 0.95  # will fail the mean-deviation rule
        raw_images.append((f"{category}-{k}", ImageBuffer(np.clip(base, 0, 1).astype(np.float32))))

result = ingest_filter(raw_images)
print(f"ingest: retained {len(result.retained)}, excluded {result.excluded}")
print(f"corpus mean grey: {result.stats.mean_grey:.4f}")

corpus = []
for image_id, img in result.retained:
    path = os.path.join(work, f"{image_id}.png")
    save_png(img, path)
    corpus.append(ManifestEntry(image_id, path, image_id.rsplit("-", 1)[0]))
write_manifest(corpus, os.path.join(work, "manifest.jsonl"))

# --- a fake model: one-hot on the truth with probability that sinks in noise
labels = tuple(f"fine-{c}" for c in CATEGORIES) + ("fine-unused",)
cmap = CategoryMap(labels, {f"fine-{c}": c for c in CATEGORIES})
conditions = ("0", "0.1", "0.35", "0.9")
p_correct = {"0": 0.95, "0.1": 0.8, "0.35": 0.4, "0.9": 0.1}

adapter_path = os.path.join(work, "scores.csv")
gen = sequence_generator(17, "fake-model")
with open(adapter_path, "w", newline="") as fh:
    writer = csv.writer(fh)
    writer.writerow(["image_id", "condition"] + [f"score_{i}" for i in range(len(labels))])
    for entry in corpus:
        for condition in conditions:
            answer = entry.category if gen.random() < p_correct[condition] else CATEGORIES[gen.integers(16)]
            scores = [0.0] * len(labels)
            scores[labels.index(f"fine-{answer}")] = 1.0
            writer.writerow([entry.image_id, condition] + [f"{s:g}" for s in scores])

config = ExperimentConfig(
    name="uniform-noise-demo",
    family="uniform-noise",
    conditions=conditions,
    trials_per_cell=3,
    block_size=16 * 4 * 3,
    side=64,
    seed=23,
)
out_csv = os.path.join(work, "raw_trials.csv")
report = run_model_experiment(
    config, PrecomputedAdapter(adapter_path, n_scores=len(labels)), corpus, cmap, out_csv
)
print(f"harness report: {report}")

analysis = analyze(read_trials(out_csv))
for condition, block in analysis["conditions"].items():
    print(
        f"condition {condition:>4}: accuracy {block['accuracy']['mean']:.3f}, "
        f"entropy {block['response_entropy_bits']['mean_of_observers']:.2f} bits, "
        f"n={block['n_trials']}"
    )

# --- seven disjoint runs give model "error bars" comparable to observer ranges
big_corpus = [(f"{c}-{i:03d}", c) for c in CATEGORIES for i in range(7 * 4 * 2)]
runs = seven_run_partition(big_corpus, per_cell=2, conditions=conditions, seed=9)
print(f"seven-run partition: {len(runs)} runs x {len(runs[0])} trials, all disjoint")

# --- training-side helpers
policy = default_augmentation_policy()
gen = sequence_generator(29, "aug-demo")
draws = [sample_augmentation(policy, gen) for _ in range(8)]
print("augmentation draws:", draws)
print("class weights for counts (100, 200):", class_weights([100, 200]))
print("100-epoch schedule:", json.dumps(training_config_preset(100)["lr_decay_epochs"]))
