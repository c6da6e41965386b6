"""Accuracy, entropy and confusion metrics over raw forced-choice trials."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .rng import sequence_generator
from .taxonomy import CATEGORIES, CATEGORY_INDEX, N_CATEGORIES, sample_decision
from .trials import TrialRow

NO_RESPONSE_ROW = 0  # confusion matrices keep failures-to-respond as the top row

ENTROPY_RULE = (
    "response entropy is computed over the 16 category bins (no-response excluded); "
    "no-response still counts as incorrect for accuracy and appears in confusion matrices"
)


def shannon_entropy_bits(counts: np.ndarray) -> float:
    """Shannon entropy in bits of a count histogram; 0 log 0 := 0."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("entropy of an empty distribution is undefined")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def response_entropy(counts: np.ndarray) -> float:
    """Entropy of a 16-way response distribution.

    Accepts 16 bins, or 17 bins with the no-response bin last (it is
    excluded before the entropy is taken).
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.shape == (N_CATEGORIES + 1,):
        counts = counts[:N_CATEGORIES]
    elif counts.shape != (N_CATEGORIES,):
        raise ValueError(f"expected 16 or 17 bins, got shape {counts.shape}")
    return shannon_entropy_bits(counts)


def mean_observer_entropy(per_observer_counts: Sequence[np.ndarray]) -> float:
    """Mean of individual observers' response entropies (never pooled-then-measured)."""
    if not per_observer_counts:
        raise ValueError("need at least one observer")
    return float(np.mean([response_entropy(c) for c in per_observer_counts]))


def prediction_entropy(scores: np.ndarray) -> float:
    """Entropy in bits of a normalized fine-grained score vector."""
    scores = np.asarray(scores, dtype=np.float64)
    if np.any(scores < 0):
        raise ValueError("scores must be nonnegative")
    if abs(scores.sum() - 1.0) > 1e-6:
        raise ValueError(f"scores must be normalized (sum = {scores.sum()})")
    return shannon_entropy_bits(scores)


def _scored(rows: Iterable[TrialRow]) -> list[TrialRow]:
    """Main trials that produced a usable response (or a no-response)."""
    return [r for r in rows if not r.is_practice and not r.is_adapter_error]


def accuracy_by_condition(rows: Iterable[TrialRow]) -> dict[str, float]:
    """Fraction correct per condition; no-response counts as incorrect.

    Conditions with zero scored trials are absent from the result, not 0.
    """
    totals: dict[str, int] = {}
    correct: dict[str, int] = {}
    for r in _scored(rows):
        totals[r.condition] = totals.get(r.condition, 0) + 1
        correct[r.condition] = correct.get(r.condition, 0) + (1 if r.is_correct else 0)
    return {c: correct[c] / totals[c] for c in totals}


def response_counts(rows: Iterable[TrialRow]) -> dict[tuple[str, str], np.ndarray]:
    """17-bin response histograms keyed by (subject_or_run, condition).

    Bins 0..15 follow the canonical category order; bin 16 is no-response.
    """
    table: dict[tuple[str, str], np.ndarray] = {}
    for r in _scored(rows):
        key = (r.subject_or_run, r.condition)
        bins = table.setdefault(key, np.zeros(N_CATEGORIES + 1))
        if r.is_no_response:
            bins[N_CATEGORIES] += 1
        else:
            bins[CATEGORY_INDEX[r.response]] += 1
    return table


def confusion_matrix(rows: Iterable[TrialRow], condition: str | None = None) -> np.ndarray:
    """(17, 16) counts: response rows (no-response on top) x true-category columns."""
    cm = np.zeros((N_CATEGORIES + 1, N_CATEGORIES))
    for r in _scored(rows):
        if condition is not None and r.condition != condition:
            continue
        col = CATEGORY_INDEX[r.true_category]
        row = NO_RESPONSE_ROW if r.is_no_response else CATEGORY_INDEX[r.response] + 1
        cm[row, col] += 1
    return cm


class PartitionError(ValueError):
    """The corpus cannot support the requested disjoint runs."""


def seven_run_partition(
    corpus: Sequence[tuple[str, str]],
    per_cell: int,
    conditions: Sequence[str],
    seed: int,
    n_runs: int = 7,
) -> list[list[tuple[str, str, str]]]:
    """Disjoint trial sets mimicking what a single observer was exposed to.

    ``corpus`` holds (image_id, category) pairs. Each run receives exactly
    ``per_cell`` images for every (category, condition) cell, and no image
    appears in more than one cell across all runs. Sampling shuffles
    id-sorted per-category pools, so the result is independent of corpus
    order and reproducible per seed.
    """
    pools: dict[str, list[str]] = {c: [] for c in CATEGORIES}
    for image_id, category in corpus:
        if category not in pools:
            raise ValueError(f"unknown category {category!r} for image {image_id!r}")
        pools[category].append(image_id)

    needed = n_runs * len(conditions) * per_cell
    runs: list[list[tuple[str, str, str]]] = [[] for _ in range(n_runs)]
    for category in CATEGORIES:
        ids = sorted(pools[category])
        if len(ids) < needed:
            short_cell = len(ids) // per_cell  # first cell that cannot be filled
            condition = conditions[short_cell % len(conditions)]
            raise PartitionError(
                f"category {category!r} has {len(ids)} images but {needed} are needed; "
                f"first deficient cell is (category={category!r}, condition={condition!r})"
            )
        gen = sequence_generator(seed, f"seven-run/{category}")
        order = [ids[i] for i in gen.permutation(len(ids))]
        cursor = 0
        for run in range(n_runs):
            for condition in conditions:
                for _ in range(per_cell):
                    runs[run].append((order[cursor], category, condition))
                    cursor += 1
    return runs


@dataclass(frozen=True)
class TradeoffPoint:
    temperature: float
    accuracy: float
    entropy_bits: float


def tradeoff_sweep(
    trial_aggs: Sequence[tuple[np.ndarray, str]],
    temperatures: Sequence[float],
    seed: int,
) -> list[TradeoffPoint]:
    """Accuracy and response entropy of sampled decisions per temperature."""
    points = []
    for t in temperatures:
        gen = sequence_generator(seed, f"tradeoff/{t!r}")
        counts = np.zeros(N_CATEGORIES)
        n_correct = 0
        for agg, truth in trial_aggs:
            choice = sample_decision(agg, t, gen)
            counts[CATEGORY_INDEX[choice]] += 1
            n_correct += choice == truth
        points.append(
            TradeoffPoint(t, n_correct / len(trial_aggs), shannon_entropy_bits(counts))
        )
    return points


# ---------------------------------------------------------------------------
# Report assembly


def condition_sort_key(condition: str):
    try:
        return (0, float(condition), condition)
    except ValueError:
        return (1, 0.0, condition)


def analyze(rows: Sequence[TrialRow]) -> dict:
    """Per-condition accuracy/entropy report over a raw-trial table.

    Practice trials are excluded; adapter errors are excluded from every
    metric but counted. Error bars are min-max ranges across subjects (or
    runs), labelled "range".
    """
    main = [r for r in rows if not r.is_practice]
    errors = sum(1 for r in main if r.is_adapter_error)
    scored = _scored(main)
    counts = response_counts(scored)
    subjects = sorted({r.subject_or_run for r in scored})
    conditions = sorted({r.condition for r in scored}, key=condition_sort_key)

    report: dict = {
        "experiments": sorted({r.experiment for r in rows}),
        "n_rows": len(rows),
        "n_practice_excluded": len(rows) - len(main),
        "n_adapter_errors": errors,
        "error_bar_rule": "range (min-max across subjects or runs), never SEM",
        "entropy_rule": ENTROPY_RULE,
        "subjects": subjects,
        "conditions": {},
    }
    for condition in conditions:
        cond_rows = [r for r in scored if r.condition == condition]
        per_subject_acc = {}
        for s in subjects:
            sub = [r for r in cond_rows if r.subject_or_run == s]
            if sub:
                per_subject_acc[s] = sum(r.is_correct for r in sub) / len(sub)
        per_subject_counts = {s: counts[(s, condition)] for s in subjects if (s, condition) in counts}
        per_subject_entropy = {
            s: response_entropy(c) for s, c in per_subject_counts.items() if c[:N_CATEGORIES].sum() > 0
        }
        pooled = np.sum(list(per_subject_counts.values()), axis=0)
        acc_values = list(per_subject_acc.values())
        report["conditions"][condition] = {
            "n_trials": len(cond_rows),
            "accuracy": {
                "mean": float(np.mean([r.is_correct for r in cond_rows])),
                "range": [min(acc_values), max(acc_values)],
                "per_subject": per_subject_acc,
            },
            "response_entropy_bits": {
                "mean_of_observers": float(np.mean(list(per_subject_entropy.values())))
                if per_subject_entropy
                else None,
                "per_subject": per_subject_entropy,
                "pooled": response_entropy(pooled) if pooled[:N_CATEGORIES].sum() > 0 else None,
            },
            "no_response_fraction": float(np.mean([r.is_no_response for r in cond_rows])),
        }
    return report


def write_report_json(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)


def write_confusion_csv(cm: np.ndarray, path) -> None:
    """One confusion matrix as CSV: response rows (no-response first) x true columns."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["response"] + list(CATEGORIES))
        writer.writerow(["no_response"] + [str(int(v)) for v in cm[NO_RESPONSE_ROW]])
        for i, name in enumerate(CATEGORIES):
            writer.writerow([name] + [str(int(v)) for v in cm[i + 1]])


def write_long_csv(rows: Sequence[TrialRow], path) -> None:
    """Plot-ready long format: condition, metric, subject_or_run, value."""
    scored = _scored(rows)
    counts = response_counts(scored)
    out = []
    for (subject, condition), bins in sorted(counts.items()):
        sub_rows = [r for r in scored if r.subject_or_run == subject and r.condition == condition]
        acc = sum(r.is_correct for r in sub_rows) / len(sub_rows)
        out.append((condition, "accuracy", subject, acc))
        if bins[:N_CATEGORIES].sum() > 0:
            out.append((condition, "response_entropy_bits", subject, response_entropy(bins)))
    out.sort(key=lambda t: (condition_sort_key(t[0]), t[1], t[2]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["condition", "metric", "subject_or_run", "value"])
        for condition, metric, subject, value in out:
            writer.writerow([condition, metric, subject, f"{value:.10g}"])


def max_response_entropy_bits() -> float:
    return math.log2(N_CATEGORIES)
