import numpy as np
import pytest

from distortbench.harness import PRESETS, ExperimentConfig
from distortbench.ingest import ManifestEntry
from distortbench.session import (
    RESPONSE_GRID_ORDER,
    TRIAL_MS,
    Click,
    DeficiencyError,
    SessionState,
    Tick,
    advance,
    at_block_boundary,
    block_feedback,
    build_plan,
    load_event_log,
    phase_timings,
    replay,
    rows_from_outcomes,
    save_event_log,
)
from distortbench.taxonomy import CATEGORIES


def corpus(per_category=100):
    return [
        ManifestEntry(f"{c}-{i:04d}", f"/img/{c}-{i:04d}.png", c)
        for c in CATEGORIES
        for i in range(per_category)
    ]


def tiny_config(conditions=("0", "0.2"), per_cell=1, practice_total=0, practice_blocks=0):
    return ExperimentConfig(
        name="toy",
        family="uniform-noise",
        conditions=conditions,
        trials_per_cell=per_cell,
        block_size=len(CATEGORIES) * len(conditions) * per_cell,
        practice_total=practice_total,
        practice_blocks=practice_blocks,
        side=64,
    )


def tiny_plan(**kwargs):
    return build_plan(tiny_config(**kwargs), corpus(10), seed=5)


class TestBuildPlan:
    def test_uniform_noise_preset_shape(self):
        plan = build_plan(PRESETS["uniform-noise"], corpus(), seed=1)
        main = [t for t in plan.trials if not t.is_practice]
        assert len(main) == 1280
        assert plan.n_practice == 256
        cells = {}
        for t in main:
            cells[(t.true_category, t.condition)] = cells.get((t.true_category, t.condition), 0) + 1
        assert len(cells) == 16 * 8
        assert all(v == 10 for v in cells.values())
        # breaks every 256 main trials
        assert [t.block for t in main] == [i // 256 + 1 for i in range(1280)]

    def test_contrast_preset_blocks_of_128(self):
        plan = build_plan(PRESETS["contrast"], corpus(), seed=2)
        main = [t for t in plan.trials if not t.is_practice]
        assert [t.block for t in main] == [i // 128 + 1 for i in range(1280)]

    def test_seeds_change_order_not_counts(self):
        cfg = PRESETS["uniform-noise"]
        a = build_plan(cfg, corpus(), seed=1)
        b = build_plan(cfg, corpus(), seed=2)
        assert [t.image_id for t in a.trials] != [t.image_id for t in b.trials]

        def cells(plan):
            out = {}
            for t in plan.trials:
                if not t.is_practice:
                    out[(t.true_category, t.condition)] = out.get((t.true_category, t.condition), 0) + 1
            return out

        assert cells(a) == cells(b)

    def test_no_stimulus_repeats_across_whole_session(self):
        plan = build_plan(PRESETS["uniform-noise"], corpus(), seed=3)
        ids = [t.image_id for t in plan.trials]
        assert len(ids) == len(set(ids))

    def test_practice_precedes_main(self):
        plan = build_plan(PRESETS["contrast"], corpus(), seed=4)
        flags = [t.is_practice for t in plan.trials]
        assert flags == sorted(flags, reverse=True)

    def test_observers_get_different_stimuli(self):
        cfg = PRESETS["uniform-noise"]
        a = build_plan(cfg, corpus(), seed=1, observer="obs-a")
        b = build_plan(cfg, corpus(), seed=1, observer="obs-b")
        assert {t.image_id for t in a.trials} != {t.image_id for t in b.trials}

    def test_deficient_corpus_reports_category(self):
        with pytest.raises(DeficiencyError, match="airplane"):
            build_plan(PRESETS["uniform-noise"], corpus(per_category=50), seed=1)

    def test_plan_json_round_trip(self):
        from distortbench.session import SessionPlan

        plan = tiny_plan()
        back = SessionPlan.from_json(plan.to_json())
        assert back.trials == plan.trials
        assert back.config == plan.config

    def test_practice_spread_when_not_divisible(self):
        plan = build_plan(tiny_config(practice_total=10, practice_blocks=1), corpus(10), seed=6)
        assert plan.n_practice == 10

    def test_response_grid_order(self):
        assert RESPONSE_GRID_ORDER[0] == "knife"
        assert RESPONSE_GRID_ORDER[-1] == "dog"
        assert sorted(RESPONSE_GRID_ORDER) == sorted(CATEGORIES)


class TestStateMachine:
    def test_timing_constants(self):
        t = phase_timings()
        assert t["trial_ms"] == 2200 == t["fixation_ms"] + t["stimulus_ms"] + t["mask_ms"] + t["response_ms"]

    def test_no_click_records_no_response(self):
        state = SessionState(tiny_plan())
        advance(state, Tick(TRIAL_MS))
        assert state.records[0].response is None
        assert state.records[0].rt_ms is None

    def test_last_click_wins(self):
        state = SessionState(tiny_plan())
        advance(state, Tick(700 + 400))  # into the response window
        advance(state, Click("cat"))
        advance(state, Tick(1000))  # now at response + 1400
        advance(state, Click("dog"))
        advance(state, Tick(TRIAL_MS))  # finish trial
        assert state.records[0].response == "dog"
        assert state.records[0].rt_ms == 1400

    def test_click_during_mask_ignored_and_tallied(self):
        state = SessionState(tiny_plan())
        advance(state, Tick(600))  # mask phase: 500-700
        assert state.phase == "mask"
        advance(state, Click("cat"))
        assert state.ignored_clicks == 1
        advance(state, Tick(TRIAL_MS - 600))
        assert state.records[0].response is None

    def test_click_during_fixation_and_stimulus_ignored(self):
        state = SessionState(tiny_plan())
        advance(state, Click("cat"))  # fixation
        advance(state, Tick(350))
        assert state.phase == "stimulus"
        advance(state, Click("cat"))
        assert state.ignored_clicks == 2

    def test_phase_sequence(self):
        state = SessionState(tiny_plan())
        seen = [state.phase]
        for ms in (300, 200, 200, 1500):
            advance(state, Tick(ms))
            seen.append(state.phase)
        assert seen[:4] == ["fixation", "stimulus", "mask", "response"]
        assert state.cursor == 1  # next trial began

    def test_tick_spanning_multiple_trials(self):
        plan = tiny_plan()
        state = SessionState(plan)
        advance(state, Tick(TRIAL_MS * 5 + 123))
        assert state.cursor == 5
        assert state.t_in_trial == 123
        assert len(state.records) == 5

    def test_every_trial_gets_a_record(self):
        plan = tiny_plan()
        state = SessionState(plan)
        advance(state, Tick(TRIAL_MS * len(plan.trials)))
        assert state.finished
        assert len(state.records) == len(plan.trials)

    def test_rt_bounded_by_window(self):
        state = SessionState(tiny_plan())
        advance(state, Tick(2199))
        advance(state, Click("oven"))
        advance(state, Tick(1))
        assert state.records[0].rt_ms == 1499

    def test_unknown_category_rejected(self):
        state = SessionState(tiny_plan())
        with pytest.raises(ValueError):
            advance(state, Click("zebra"))

    def test_finished_session_rejects_events(self):
        plan = tiny_plan()
        state = SessionState(plan)
        advance(state, Tick(TRIAL_MS * len(plan.trials)))
        with pytest.raises(ValueError):
            advance(state, Tick(1))


class TestBlocksAndFeedback:
    def test_block_feedback_half_correct(self):
        plan = tiny_plan()  # one block of 32
        state = SessionState(plan)
        for i, trial in enumerate(plan.trials):
            advance(state, Tick(800))
            if i % 2 == 0:
                advance(state, Click(trial.true_category))
            advance(state, Tick(TRIAL_MS - 800))
        assert state.finished and at_block_boundary(state)
        assert block_feedback(state) == 0.5

    def test_feedback_only_at_boundary(self):
        state = SessionState(tiny_plan())
        advance(state, Tick(TRIAL_MS + 10))
        with pytest.raises(ValueError):
            block_feedback(state)

    def test_practice_blocks_feed_back_but_marked(self):
        plan = build_plan(tiny_config(practice_total=32, practice_blocks=1), corpus(10), seed=7)
        state = SessionState(plan)
        for trial in plan.trials[:32]:
            advance(state, Tick(800))
            advance(state, Click(trial.true_category))
            advance(state, Tick(TRIAL_MS - 800))
        assert at_block_boundary(state)
        assert block_feedback(state) == 1.0
        rows = rows_from_outcomes(plan, state.records)
        assert all(r.is_practice for r in rows)


class TestReplay:
    def drive(self, plan, rng):
        state = SessionState(plan)
        while not state.finished:
            advance(state, Tick(int(rng.integers(1, 900))))
            if state.phase == "response" and rng.random() < 0.5:
                advance(state, Click(CATEGORIES[rng.integers(16)]))
        return state

    def test_replaying_event_log_reproduces_records(self, tmp_path):
        plan = tiny_plan()
        rng = np.random.default_rng(13)
        state = self.drive(plan, rng)
        path = tmp_path / "events.jsonl"
        save_event_log(state.event_log, path)
        again = replay(plan, load_event_log(path))
        assert [(r.response, r.rt_ms) for r in again.records] == [
            (r.response, r.rt_ms) for r in state.records
        ]
        assert again.ignored_clicks == state.ignored_clicks

    def test_per_cell_response_counts_match_plan(self):
        plan = tiny_plan(per_cell=2)
        rng = np.random.default_rng(17)
        state = self.drive(plan, rng)
        rows = rows_from_outcomes(plan, state.records)
        cells = {}
        for r in rows:
            cells[(r.true_category, r.condition)] = cells.get((r.true_category, r.condition), 0) + 1
        assert all(v == 2 for v in cells.values())

    def test_rows_carry_na_for_no_response(self):
        plan = tiny_plan()
        state = SessionState(plan)
        advance(state, Tick(TRIAL_MS))
        rows = rows_from_outcomes(plan, state.records)
        assert rows[0].response == "na"
        assert rows[0].rt_ms is None
