"""16 entry-level categories, fine-label mapping and decision aggregation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rng import sequence_generator

logger = logging.getLogger(__name__)

# Canonical order; ties in decide() resolve to the earliest name here.
CATEGORIES = (
    "airplane",
    "bicycle",
    "boat",
    "car",
    "chair",
    "dog",
    "keyboard",
    "oven",
    "bear",
    "bird",
    "bottle",
    "cat",
    "clock",
    "elephant",
    "knife",
    "truck",
)
N_CATEGORIES = len(CATEGORIES)
CATEGORY_INDEX = {name: i for i, name in enumerate(CATEGORIES)}


class NoEvidenceError(ValueError):
    """Every mapped category received zero evidence; the caller decides policy."""


@dataclass(frozen=True)
class CategoryMap:
    """Maps a model's fine-grained label vocabulary onto the 16 categories.

    ``labels`` fixes the score-vector indexing (index i belongs to labels[i]);
    fine labels absent from ``category_of`` are disregarded: their scores
    never reach any category.
    """

    labels: tuple[str, ...]
    category_of: dict[str, str]

    def __post_init__(self) -> None:
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate fine labels in vocabulary")
        unknown = {c for c in self.category_of.values() if c not in CATEGORY_INDEX}
        if unknown:
            raise ValueError(f"unknown entry categories: {sorted(unknown)}")
        missing = [l for l in self.category_of if l not in set(self.labels)]
        if missing:
            raise ValueError(f"mapped fine labels absent from vocabulary: {missing[:5]}")
        covered = set(self.category_of.values())
        if covered != set(CATEGORIES):
            raise ValueError(f"map must cover all 16 categories; missing {sorted(set(CATEGORIES) - covered)}")

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    def indices_of(self, category: str) -> np.ndarray:
        return np.array(
            [i for i, l in enumerate(self.labels) if self.category_of.get(l) == category], dtype=np.intp
        )

    def index_matrix(self) -> np.ndarray:
        """(16, n_labels) 0/1 matrix; row c selects labels mapped to category c."""
        m = np.zeros((N_CATEGORIES, self.n_labels))
        for i, label in enumerate(self.labels):
            cat = self.category_of.get(label)
            if cat is not None:
                m[CATEGORY_INDEX[cat], i] = 1.0
        return m

    def disregarded(self) -> tuple[str, ...]:
        return tuple(l for l in self.labels if l not in self.category_of)

    def coverage(self) -> dict:
        per_category = {c: int(len(self.indices_of(c))) for c in CATEGORIES}
        return {
            "n_labels": self.n_labels,
            "n_mapped": sum(per_category.values()),
            "n_disregarded": self.n_labels - sum(per_category.values()),
            "per_category": per_category,
        }


def load_labels(path) -> tuple[str, ...]:
    """Ordered fine-label vocabulary, one label per line."""
    with open(path, encoding="utf-8") as fh:
        return tuple(line.strip() for line in fh if line.strip())


def load_category_map(map_path, labels: Sequence[str]) -> CategoryMap:
    """Load a tab-separated ``fine_label<TAB>entry_category`` map file."""
    category_of: dict[str, str] = {}
    with open(map_path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{map_path}:{n}: expected 'fine_label<TAB>entry_category'")
            fine, category = parts[0].strip(), parts[1].strip()
            if fine in category_of and category_of[fine] != category:
                raise ValueError(f"{map_path}:{n}: fine label {fine!r} mapped twice")
            category_of[fine] = category
    return CategoryMap(tuple(labels), category_of)


def aggregate(scores: np.ndarray, cmap: CategoryMap) -> np.ndarray:
    """Per-category sums of the scores of mapped fine labels (16-vector)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (cmap.n_labels,):
        raise ValueError(f"scores shape {scores.shape} does not match {cmap.n_labels} labels")
    if np.any(scores < 0):
        raise ValueError("scores must be nonnegative")
    return cmap.index_matrix() @ scores


def decide(agg: np.ndarray) -> str:
    """Argmax category; ties go to the earliest name in canonical order."""
    agg = np.asarray(agg, dtype=np.float64)
    if agg.shape != (N_CATEGORIES,):
        raise ValueError(f"expected a 16-vector, got shape {agg.shape}")
    if not np.any(agg > 0):
        raise NoEvidenceError("all 16 category sums are zero")
    best = int(np.argmax(agg))  # argmax returns the first maximum
    if int(np.count_nonzero(agg == agg[best])) > 1:
        logger.debug("decision tie at %.6g resolved to %s", agg[best], CATEGORIES[best])
    return CATEGORIES[best]


def decision_probabilities(agg: np.ndarray, temperature: float) -> np.ndarray:
    """Power-scaled decision distribution: p_i proportional to agg_i ** (1/T)."""
    if temperature <= 0:
        raise ValueError("temperature must be positive; the T -> 0 limit is decide()")
    agg = np.asarray(agg, dtype=np.float64)
    if not np.any(agg > 0):
        raise NoEvidenceError("all 16 category sums are zero")
    with np.errstate(divide="ignore"):
        logits = np.log(agg) / temperature  # zeros -> -inf -> probability 0
    logits -= logits.max()
    p = np.exp(logits)
    return p / p.sum()


def sample_decision(agg: np.ndarray, temperature: float, rng: np.random.Generator | int) -> str:
    """Sample a category from the temperature-scaled decision distribution."""
    if isinstance(rng, (int, np.integer)):
        rng = sequence_generator(int(rng), "sample-decision")
    p = decision_probabilities(agg, temperature)
    idx = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
    return CATEGORIES[min(idx, N_CATEGORIES - 1)]
