"""From 1000-way scores to 16-way decisions, and the metrics on top.

Walks the decision pipeline (aggregate -> decide / sample), the entropy
metrics with their anchor values, and sweeps the sampling temperature to
trace the accuracy/entropy trade-off. Saves the trade-off curve to
demos/output/temperature_tradeoff.png.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from distortbench import CATEGORIES, aggregate, decide, sample_decision
from distortbench.metrics import (
    mean_observer_entropy,
    prediction_entropy,
    response_entropy,
    tradeoff_sweep,
)
from distortbench.rng import sequence_generator
from distortbench.taxonomy import CATEGORY_INDEX, CategoryMap

OUT_DIR = os.path.join(os.path.dirname(__file__), "output")
os.makedirs(OUT_DIR, exist_ok=True)

# A toy vocabulary: three fine labels per category plus two disregarded ones.
labels = tuple(f"{c}/{i}" for c in CATEGORIES for i in range(3)) + ("other/0", "other/1")
cmap = CategoryMap(labels, {f"{c}/{i}": c for c in CATEGORIES for i in range(3)})
print(f"vocabulary: {cmap.n_labels} labels, {len(cmap.disregarded())} disregarded")

# aggregate sums mapped scores per category; decide takes the argmax
rng = np.random.default_rng(1)
scores = rng.random(cmap.n_labels) * 0.01
for i, l in enumerate(labels):
    if l.startswith("dog/"):
        scores[i] += 0.3
agg = aggregate(scores, cmap)
print(f"decision: {decide(agg)} (dog mass {agg[CATEGORY_INDEX['dog']]:.3f})")

# entropy anchors
uniform16 = np.full(16, 10.0)
print(f"uniform 16-way response entropy: {response_entropy(uniform16):.1f} bits (max 4)")
one_hot = np.zeros(16)
one_hot[3] = 80
print(f"single-category responder: {response_entropy(one_hot):.1f} bits")
print(f"uniform 1000-way prediction entropy: {prediction_entropy(np.full(1000, 1e-3)):.3f} bits")

# per-observer averaging matters: two perfectly biased observers pool to 1 bit
a = np.zeros(16)
a[0] = 50
b = np.zeros(16)
b[1] = 50
print(
    f"two opposite-biased observers: mean-of-entropies {mean_observer_entropy([a, b]):.1f} bits, "
    f"pooled {response_entropy(a + b):.1f} bits"
)

# temperature trade-off on a biased synthetic model
gen = sequence_generator(5, "demo-sweep")
trials = []
for i in range(4000):
    truth = CATEGORIES[i % 16]
    v = gen.random(16) * 0.05 + 0.01
    v[CATEGORY_INDEX["bottle"]] += 0.35  # standing bias, like a network on noise
    v[CATEGORY_INDEX[truth]] += gen.random() * 0.5
    trials.append((v, truth))

temperatures = [1e-9, 0.1, 0.3, 1.0, 3.0, 10.0, 1e3]
points = tradeoff_sweep(trials, temperatures, seed=6)
for p in points:
    print(f"T={p.temperature:<8g} accuracy={p.accuracy:.3f} entropy={p.entropy_bits:.3f} bits")

fig, ax = plt.subplots(figsize=(4.8, 3.6))
ax.plot([p.entropy_bits for p in points], [p.accuracy for p in points], "o-")
for p, t in zip(points, temperatures):
    ax.annotate(f"T={t:g}", (p.entropy_bits, p.accuracy), fontsize=7, xytext=(3, 3), textcoords="offset points")
ax.axhline(1 / 16, color="grey", ls=":", label="chance (1/16)")
ax.axvline(4.0, color="grey", ls="--", label="max entropy (4 bits)")
ax.set_xlabel("response entropy (bits)")
ax.set_ylabel("accuracy")
ax.set_title("sampling temperature trade-off")
ax.legend(fontsize=7)
fig.tight_layout()
path = os.path.join(OUT_DIR, "temperature_tradeoff.png")
fig.savefig(path, dpi=110)
print(f"wrote {path}")

# one low-temperature draw equals the argmax decision
assert sample_decision(agg, 1e-6, 42) == decide(agg)
