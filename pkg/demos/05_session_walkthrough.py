"""A complete observer session, driven headlessly.

Builds a counterbalanced plan, steps the 2200 ms trial state machine with a
scripted observer (late clicks, changes of mind, the occasional lapse),
prints block feedback, and exports the raw-trial CSV. The same plan/engine
sit behind the HTTP API (`distortbench serve`) that the browser runner uses.
"""

import os
import tempfile

import numpy as np

from distortbench.harness import ExperimentConfig
from distortbench.ingest import ManifestEntry
from distortbench.metrics import analyze
from distortbench.rng import sequence_generator
from distortbench.session import (
    Click,
    SessionState,
    Tick,
    TRIAL_MS,
    advance,
    at_block_boundary,
    block_feedback,
    build_plan,
    replay,
    rows_from_outcomes,
)
from distortbench.taxonomy import CATEGORIES
from distortbench.trials import read_trials, write_trials

corpus = [
    ManifestEntry(f"{c}-{i:03d}", f"/stimuli/{c}-{i:03d}.png", c)
    for c in CATEGORIES
    for i in range(12)
]

config = ExperimentConfig(
    name="uniform-noise-mini",
    family="uniform-noise",
    conditions=("0", "0.2", "0.9"),
    trials_per_cell=2,
    block_size=48,  # two blocks of 48 main trials
    practice_total=48,
    practice_blocks=1,
    side=64,
)
plan = build_plan(config, corpus, seed=99, observer="demo-observer")
print(f"plan: {plan.n_practice} practice + {plan.n_main} main trials")

# scripted observer: answers correctly unless the condition is hard, clicks
# late, sometimes revises, and misses ~5% of response windows entirely
gen = sequence_generator(7, "observer")
state = SessionState(plan)
while not state.finished:
    trial = state.current_trial()
    advance(state, Tick(700))  # fixation + stimulus + mask
    if gen.random() < 0.05:
        advance(state, Tick(1500))  # lapse: window expires
        continue
    advance(state, Tick(int(gen.integers(200, 900))))
    p_correct = {"0": 0.95, "0.2": 0.8, "0.9": 0.15}[trial.condition]
    first = trial.true_category if gen.random() < p_correct else CATEGORIES[gen.integers(16)]
    advance(state, Click(first))
    if gen.random() < 0.2:  # change of mind inside the window
        advance(state, Tick(int(gen.integers(100, 400))))
        advance(state, Click(trial.true_category))
    advance(state, Tick(TRIAL_MS - state.t_in_trial))  # run out this trial exactly
    if at_block_boundary(state):
        kind = "practice" if state.records[-1].trial.is_practice else "main"
        print(f"  break after {kind} block {state.records[-1].trial.block}: {block_feedback(state):.1%} correct")

print(f"collected {len(state.records)} records, {state.ignored_clicks} out-of-window clicks ignored")

# the event log replays to the identical record set
again = replay(plan, state.event_log)
assert [(r.response, r.rt_ms) for r in again.records] == [(r.response, r.rt_ms) for r in state.records]
print("event-log replay reproduces the session exactly")

work = tempfile.mkdtemp(prefix="distortbench-session-")
csv_path = os.path.join(work, "session.csv")
write_trials(rows_from_outcomes(plan, state.records), csv_path)
report = analyze(read_trials(csv_path))
for condition, block in sorted(report["conditions"].items()):
    print(
        f"condition {condition:>4}: accuracy {block['accuracy']['mean']:.3f}, "
        f"no-response {block['no_response_fraction']:.1%}"
    )
print(f"raw trials written to {csv_path}")
print("to serve real sessions over HTTP: distortbench serve --corpus <manifest> --data-dir <dir>")
