import math

import numpy as np
import pytest

from distortbench.metrics import (
    PartitionError,
    accuracy_by_condition,
    analyze,
    confusion_matrix,
    mean_observer_entropy,
    prediction_entropy,
    response_counts,
    response_entropy,
    seven_run_partition,
    shannon_entropy_bits,
    tradeoff_sweep,
)
from distortbench.rng import sequence_generator
from distortbench.taxonomy import CATEGORIES, CATEGORY_INDEX
from distortbench.trials import ADAPTER_ERROR, NO_RESPONSE, TrialRow


def row(condition="c0", truth="dog", response="dog", subject="s1", practice=False, trial=0):
    return TrialRow(
        experiment="exp",
        subject_or_run=subject,
        session=1,
        block=1,
        trial=trial,
        image_id=f"img-{trial}",
        condition=condition,
        true_category=truth,
        response=response,
        rt_ms=None,
        is_practice=practice,
    )


class TestAccuracy:
    def test_all_correct(self):
        rows = [row(trial=i) for i in range(8)]
        assert accuracy_by_condition(rows) == {"c0": 1.0}

    def test_sixteen_trial_toy_set(self):
        # 4 no-response + 8 correct + 4 wrong -> 0.5
        rows = (
            [row(trial=i, response=NO_RESPONSE) for i in range(4)]
            + [row(trial=4 + i) for i in range(8)]
            + [row(trial=12 + i, response="cat") for i in range(4)]
        )
        assert accuracy_by_condition(rows) == {"c0": 0.5}

    def test_chance_level_for_random_responses(self):
        gen = sequence_generator(11, "chance")
        rows = []
        for i in range(10_000):
            truth = CATEGORIES[i % 16]  # balanced ground truth
            response = CATEGORIES[gen.integers(16)]
            rows.append(row(trial=i, truth=truth, response=response))
        acc = accuracy_by_condition(rows)["c0"]
        assert abs(acc - 1 / 16) < 0.01

    def test_empty_condition_absent_not_zero(self):
        assert accuracy_by_condition([]) == {}

    def test_practice_and_adapter_errors_excluded(self):
        rows = [row(trial=0), row(trial=1, practice=True, response="cat"), row(trial=2, response=ADAPTER_ERROR)]
        assert accuracy_by_condition(rows) == {"c0": 1.0}


class TestEntropy:
    def test_uniform_16_is_exactly_four_bits(self):
        assert response_entropy(np.full(16, 5.0)) == 4.0

    def test_one_hot_is_zero_bits(self):
        counts = np.zeros(16)
        counts[3] = 99
        assert response_entropy(counts) == 0.0

    def test_two_way_split_is_one_bit(self):
        counts = np.zeros(16)
        counts[0] = counts[1] = 10
        assert response_entropy(counts) == 1.0

    def test_no_response_bin_excluded(self):
        counts = np.zeros(17)
        counts[0] = counts[1] = 10
        counts[16] = 1000  # must not affect the 16-way entropy
        assert response_entropy(counts) == 1.0

    def test_mean_observer_entropy_is_mean_of_entropies(self):
        a = np.zeros(16)
        a[CATEGORY_INDEX["dog"]] = 10
        b = np.zeros(16)
        b[CATEGORY_INDEX["cat"]] = 10
        # each observer is perfectly biased: mean entropy 0; pooled would be 1 bit
        assert mean_observer_entropy([a, b]) == 0.0
        assert response_entropy(a + b) == 1.0

    def test_identical_observers_match_single(self):
        c = np.arange(1.0, 17.0)
        assert mean_observer_entropy([c, c, c]) == pytest.approx(response_entropy(c), abs=1e-12)

    def test_arithmetic_mean(self):
        uniform = np.full(16, 2.0)  # 4 bits
        quarter = np.zeros(16)
        quarter[:4] = 5.0  # 2 bits
        assert mean_observer_entropy([uniform, quarter]) == pytest.approx(3.0)

    def test_jensen_inequality_on_random_fixtures(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            dists = [rng.integers(0, 30, 16).astype(float) + 1 for _ in range(4)]
            pooled = response_entropy(np.sum(dists, axis=0))
            assert mean_observer_entropy(dists) <= pooled + 1e-12

    def test_prediction_entropy_anchors(self):
        assert prediction_entropy(np.full(1000, 1 / 1000)) == pytest.approx(math.log2(1000), abs=1e-9)
        one_hot = np.zeros(1000)
        one_hot[42] = 1.0
        assert prediction_entropy(one_hot) == 0.0
        half = np.zeros(1000)
        half[0] = half[1] = 0.5
        assert prediction_entropy(half) == 1.0

    def test_prediction_entropy_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            prediction_entropy(np.full(1000, 2 / 1000))

    def test_empty_distribution_rejected(self):
        with pytest.raises(ValueError):
            shannon_entropy_bits(np.zeros(16))


class TestConfusion:
    def make_rows(self):
        rows = []
        t = 0
        for truth in CATEGORIES:
            rows.append(row(trial=t, truth=truth, response=truth))
            t += 1
            rows.append(row(trial=t, truth=truth, response="dog"))
            t += 1
            rows.append(row(trial=t, truth=truth, response=NO_RESPONSE))
            t += 1
        return rows

    def test_shape_and_column_sums(self):
        cm = confusion_matrix(self.make_rows())
        assert cm.shape == (17, 16)
        assert np.all(cm.sum(axis=0) == 3.0)  # three trials per true category

    def test_no_response_on_top_row(self):
        cm = confusion_matrix(self.make_rows())
        assert np.all(cm[0] == 1.0)

    def test_accuracy_equals_subblock_trace(self):
        rows = self.make_rows()
        cm = confusion_matrix(rows)
        trace = float(np.trace(cm[1:, :]))
        assert trace / cm.sum() == pytest.approx(accuracy_by_condition(rows)["c0"])

    def test_condition_filter(self):
        rows = [row(trial=0, condition="a"), row(trial=1, condition="b")]
        assert confusion_matrix(rows, "a").sum() == 1.0


class TestSevenRunPartition:
    CONDITIONS = tuple(f"c{i}" for i in range(4))

    def corpus(self, per_category):
        return [(f"{c}-{i:04d}", c) for c in CATEGORIES for i in range(per_category)]

    def test_exact_size_corpus_fully_consumed(self):
        corpus = self.corpus(7 * 4 * 2)
        runs = seven_run_partition(corpus, 2, self.CONDITIONS, seed=1)
        used = [image_id for run in runs for image_id, _, _ in run]
        assert sorted(used) == sorted(image_id for image_id, _ in corpus)

    def test_pairwise_disjoint(self):
        runs = seven_run_partition(self.corpus(70), 2, self.CONDITIONS, seed=2)
        sets = [set(image_id for image_id, _, _ in run) for run in runs]
        for i in range(len(sets)):
            for j in range(i + 1, len(sets)):
                assert not sets[i] & sets[j]

    def test_per_cell_counts(self):
        runs = seven_run_partition(self.corpus(70), 2, self.CONDITIONS, seed=3)
        for run in runs:
            for category in CATEGORIES:
                for condition in self.CONDITIONS:
                    n = sum(1 for i, c, d in run if c == category and d == condition)
                    assert n == 2

    def test_reproducible_and_seed_sensitive(self):
        corpus = self.corpus(70)
        a = seven_run_partition(corpus, 2, self.CONDITIONS, seed=4)
        b = seven_run_partition(corpus, 2, self.CONDITIONS, seed=4)
        c = seven_run_partition(corpus, 2, self.CONDITIONS, seed=5)
        assert a == b
        assert a != c

    def test_corpus_order_invariant(self):
        corpus = self.corpus(70)
        shuffled = list(reversed(corpus))
        assert seven_run_partition(corpus, 2, self.CONDITIONS, seed=6) == seven_run_partition(
            shuffled, 2, self.CONDITIONS, seed=6
        )

    def test_insufficient_corpus_names_cell(self):
        with pytest.raises(PartitionError, match=r"airplane.*condition='c2'"):
            # 37 images fill 18 complete cells; cell 18 is (run 4, condition c2)
            seven_run_partition(self.corpus(37), 2, self.CONDITIONS, seed=7)

    def test_noise_experiment_shape(self):
        conditions = tuple(f"w{i}" for i in range(8))
        runs = seven_run_partition(self.corpus(7 * 8 * 10), 10, conditions, seed=8)
        assert all(len(run) == 1280 for run in runs)  # 10 x 16 x 8


class TestTradeoffSweep:
    def make_trials(self, n=512):
        gen = sequence_generator(21, "sweep-fixture")
        trials = []
        for i in range(n):
            truth = CATEGORIES[i % 16]
            scores = gen.random(16) * 0.05
            scores[CATEGORY_INDEX[truth]] += 0.6 * gen.random() + 0.2
            trials.append((scores, truth))
        return trials

    def test_cold_limit_equals_argmax(self):
        from distortbench.taxonomy import decide

        trials = self.make_trials()
        argmax_acc = np.mean([decide(agg) == truth for agg, truth in trials])
        point = tradeoff_sweep(trials, [1e-9], seed=1)[0]
        assert point.accuracy == pytest.approx(argmax_acc)

    def test_hot_limit_uniform(self):
        trials = self.make_trials(10_000)
        point = tradeoff_sweep(trials, [1e6], seed=2)[0]
        assert abs(point.accuracy - 1 / 16) < 0.01
        assert abs(point.entropy_bits - 4.0) < 0.05

    def test_entropy_nondecreasing_in_temperature(self):
        trials = self.make_trials(4096)
        temps = [1e-9, 0.25, 0.5, 1.0, 2.0, 8.0, 1e3]
        points = tradeoff_sweep(trials, temps, seed=3)
        entropies = [p.entropy_bits for p in points]
        assert all(b >= a - 0.05 for a, b in zip(entropies, entropies[1:]))

    def test_deterministic(self):
        trials = self.make_trials(128)
        assert tradeoff_sweep(trials, [1.0], seed=4) == tradeoff_sweep(trials, [1.0], seed=4)


class TestAnalyze:
    def make_rows(self):
        rows = []
        t = 0
        for subject in ("s1", "s2"):
            for condition in ("0", "1"):
                for truth in CATEGORIES:
                    resp = truth if subject == "s1" else ("dog" if condition == "1" else truth)
                    rows.append(row(trial=t, condition=condition, truth=truth, response=resp, subject=subject))
                    t += 1
        rows.append(row(trial=t, practice=True))
        return rows

    def test_report_structure(self):
        report = analyze(self.make_rows())
        assert report["n_practice_excluded"] == 1
        assert set(report["conditions"]) == {"0", "1"}
        c1 = report["conditions"]["1"]
        assert c1["accuracy"]["per_subject"]["s1"] == 1.0
        assert c1["accuracy"]["per_subject"]["s2"] == pytest.approx(1 / 16)
        assert c1["accuracy"]["range"] == [pytest.approx(1 / 16), 1.0]

    def test_entropy_is_mean_of_observers(self):
        report = analyze(self.make_rows())
        c1 = report["conditions"]["1"]
        # s1 responds uniformly over 16 (4 bits), s2 always dog (0 bits)
        assert c1["response_entropy_bits"]["per_subject"]["s1"] == 4.0
        assert c1["response_entropy_bits"]["per_subject"]["s2"] == 0.0
        assert c1["response_entropy_bits"]["mean_of_observers"] == 2.0
        assert c1["response_entropy_bits"]["pooled"] > 2.0

    def test_response_counts_totals(self):
        counts = response_counts(self.make_rows())
        assert counts[("s1", "0")].sum() == 16.0
