"""Psychophysics session engine: counterbalanced plans and the timed trial machine.

A session plan fixes every stimulus, condition and block boundary up front;
the state machine then walks fixation -> stimulus -> mask -> response with
logical millisecond ticks, so replaying a recorded event log reproduces the
records exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .harness import ExperimentConfig
from .ingest import ManifestEntry
from .rng import sequence_generator
from .taxonomy import CATEGORIES, CATEGORY_INDEX
from .trials import NO_RESPONSE, TrialRow

FIXATION_MS = 300
STIMULUS_MS = 200
MASK_MS = 200
RESPONSE_MS = 1500
TRIAL_MS = FIXATION_MS + STIMULUS_MS + MASK_MS + RESPONSE_MS  # 2200, not self-paced

PHASE_BOUNDARIES = (
    ("fixation", FIXATION_MS),
    ("stimulus", FIXATION_MS + STIMULUS_MS),
    ("mask", FIXATION_MS + STIMULUS_MS + MASK_MS),
    ("response", TRIAL_MS),
)

# Response-screen icon grid, row-wise from top to bottom.
RESPONSE_GRID_ORDER = (
    "knife",
    "bicycle",
    "bear",
    "truck",
    "airplane",
    "clock",
    "boat",
    "car",
    "keyboard",
    "oven",
    "cat",
    "bird",
    "elephant",
    "chair",
    "bottle",
    "dog",
)


def phase_timings() -> dict:
    return {
        "fixation_ms": FIXATION_MS,
        "stimulus_ms": STIMULUS_MS,
        "mask_ms": MASK_MS,
        "response_ms": RESPONSE_MS,
        "trial_ms": TRIAL_MS,
    }


class DeficiencyError(ValueError):
    """The corpus cannot cover the plan's per-category image demand."""


@dataclass(frozen=True)
class PlannedTrial:
    index: int
    image_id: str
    path: str
    condition: str
    true_category: str
    block: int
    is_practice: bool


@dataclass
class SessionPlan:
    config: ExperimentConfig
    observer: str
    seed: int
    trials: list[PlannedTrial]

    @property
    def n_practice(self) -> int:
        return sum(1 for t in self.trials if t.is_practice)

    @property
    def n_main(self) -> int:
        return len(self.trials) - self.n_practice

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "observer": self.observer,
            "seed": self.seed,
            "trials": [asdict(t) for t in self.trials],
        }

    @classmethod
    def from_json(cls, rec: dict) -> "SessionPlan":
        return cls(
            config=ExperimentConfig.from_json(rec["config"]),
            observer=rec["observer"],
            seed=rec["seed"],
            trials=[PlannedTrial(**t) for t in rec["trials"]],
        )


def _cell_counts(total: int, n_conditions: int) -> dict[tuple[str, str], int]:
    """Spread `total` trials over the 16 x n_conditions cells as evenly as possible."""
    cells = [(c, j) for c in CATEGORIES for j in range(n_conditions)]
    base, remainder = divmod(total, len(cells))
    counts = {}
    for k, (category, j) in enumerate(cells):
        counts[(category, j)] = base + (1 if k < remainder else 0)
    return counts


def build_plan(
    config: ExperimentConfig,
    corpus: Sequence[ManifestEntry],
    seed: int,
    observer: str = "observer",
) -> SessionPlan:
    """Counterbalanced per-observer plan: practice first, then the main trials.

    Every (category, condition) cell of the main phase holds exactly
    trials_per_cell trials; stimuli are drawn without replacement across the
    whole session (practice included), independently per observer/seed.
    """
    config.validate()
    pools: dict[str, list[ManifestEntry]] = {c: [] for c in CATEGORIES}
    for entry in corpus:
        if entry.category not in pools:
            raise ValueError(f"unknown category {entry.category!r}")
        pools[entry.category].append(entry)

    n_cond = len(config.conditions)
    practice_cells = _cell_counts(config.practice_total, n_cond)
    demand = {
        c: config.trials_per_cell * n_cond + sum(practice_cells[(c, j)] for j in range(n_cond))
        for c in CATEGORIES
    }
    for category in CATEGORIES:
        if len(pools[category]) < demand[category]:
            raise DeficiencyError(
                f"category {category!r}: need {demand[category]} distinct images, have {len(pools[category])}"
            )

    shuffled: dict[str, list[ManifestEntry]] = {}
    for category in CATEGORIES:
        entries = sorted(pools[category], key=lambda e: e.image_id)
        gen = sequence_generator(seed, f"plan/{observer}/{category}")
        shuffled[category] = [entries[i] for i in gen.permutation(len(entries))]

    cursors = {c: 0 for c in CATEGORIES}

    def take(category: str) -> ManifestEntry:
        entry = shuffled[category][cursors[category]]
        cursors[category] += 1
        return entry

    main: list[tuple[ManifestEntry, str, str]] = []
    for category in CATEGORIES:
        for condition in config.conditions:
            for _ in range(config.trials_per_cell):
                main.append((take(category), condition, category))
    practice: list[tuple[ManifestEntry, str, str]] = []
    for category in CATEGORIES:
        for j, condition in enumerate(config.conditions):
            for _ in range(practice_cells[(category, j)]):
                practice.append((take(category), condition, category))

    order_gen = sequence_generator(seed, f"order/{observer}")
    practice = [practice[i] for i in order_gen.permutation(len(practice))]
    main = [main[i] for i in order_gen.permutation(len(main))]

    practice_block = max(1, config.practice_total // config.practice_blocks) if config.practice_blocks else max(1, len(practice))
    trials = []
    for i, (entry, condition, category) in enumerate(practice):
        trials.append(
            PlannedTrial(i, entry.image_id, entry.path, condition, category, i // practice_block + 1, True)
        )
    for i, (entry, condition, category) in enumerate(main):
        trials.append(
            PlannedTrial(
                len(practice) + i,
                entry.image_id,
                entry.path,
                condition,
                category,
                i // config.block_size + 1,
                False,
            )
        )
    return SessionPlan(config=config, observer=observer, seed=seed, trials=trials)


# ---------------------------------------------------------------------------
# Timed state machine


@dataclass(frozen=True)
class Tick:
    ms: int


@dataclass(frozen=True)
class Click:
    category: str


Event = Tick | Click


@dataclass
class TrialOutcome:
    trial: PlannedTrial
    response: str | None  # None -> failure to respond
    rt_ms: int | None  # ms from response-screen onset to the counted click


@dataclass
class SessionState:
    """Cursor, logical clock and collected outcomes of one running session."""

    plan: SessionPlan
    cursor: int = 0
    t_in_trial: int = 0
    provisional: tuple[str, int] | None = None
    records: list[TrialOutcome] = field(default_factory=list)
    ignored_clicks: int = 0
    event_log: list[dict] = field(default_factory=list)

    @property
    def finished(self) -> bool:
        return self.cursor >= len(self.plan.trials)

    @property
    def phase(self) -> str:
        if self.finished:
            return "finished"
        for name, end in PHASE_BOUNDARIES:
            if self.t_in_trial < end:
                return name
        return "response"  # t == TRIAL_MS is resolved by the next tick step

    @property
    def status(self) -> str:
        if self.finished:
            return "finished"
        return "practice" if self.plan.trials[self.cursor].is_practice else "main"

    def current_trial(self) -> PlannedTrial:
        if self.finished:
            raise ValueError("session is finished")
        return self.plan.trials[self.cursor]


def advance(state: SessionState, event: Event) -> SessionState:
    """Apply one event to the session's logical clock; mutates and returns state.

    Clicks register only during the 1500 ms response window and overwrite the
    provisional response (the last click counts); window expiry without a
    click records a failure to respond. Clicks in any other phase are ignored
    and tallied. Each trial occupies exactly 2200 ms of logical time.
    """
    if state.finished:
        raise ValueError("session is finished")
    if isinstance(event, Tick):
        if event.ms < 0:
            raise ValueError("time cannot run backwards")
        state.event_log.append({"type": "tick", "ms": event.ms})
        remaining = event.ms
        while remaining > 0 and not state.finished:
            step = min(remaining, TRIAL_MS - state.t_in_trial)
            state.t_in_trial += step
            remaining -= step
            if state.t_in_trial >= TRIAL_MS:
                _finalize_trial(state)
    elif isinstance(event, Click):
        if event.category not in CATEGORY_INDEX:
            raise ValueError(f"unknown category {event.category!r}")
        state.event_log.append({"type": "click", "category": event.category})
        if state.phase == "response":
            state.provisional = (event.category, state.t_in_trial - (TRIAL_MS - RESPONSE_MS))
        else:
            state.ignored_clicks += 1
    else:
        raise TypeError(f"unknown event {event!r}")
    return state


def _finalize_trial(state: SessionState) -> None:
    trial = state.plan.trials[state.cursor]
    if state.provisional is None:
        state.records.append(TrialOutcome(trial, None, None))
    else:
        category, rt = state.provisional
        state.records.append(TrialOutcome(trial, category, rt))
    state.cursor += 1
    state.t_in_trial = 0
    state.provisional = None


def at_block_boundary(state: SessionState) -> bool:
    if not state.records or state.t_in_trial != 0:
        return False
    last = state.records[-1].trial
    if state.finished:
        return True
    nxt = state.plan.trials[state.cursor]
    return (last.is_practice, last.block) != (nxt.is_practice, nxt.block)


def block_feedback(state: SessionState) -> float:
    """Fraction correct over the block that just finished."""
    if not at_block_boundary(state):
        raise ValueError("feedback is only defined at a block boundary")
    last = state.records[-1].trial
    block = [
        r
        for r in state.records
        if r.trial.block == last.block and r.trial.is_practice == last.is_practice
    ]
    return sum(1 for r in block if r.response == r.trial.true_category) / len(block)


def replay(plan: SessionPlan, events: Iterable[dict]) -> SessionState:
    """Rebuild a session state from its recorded event log."""
    state = SessionState(plan)
    for rec in events:
        if rec["type"] == "tick":
            advance(state, Tick(rec["ms"]))
        elif rec["type"] == "click":
            advance(state, Click(rec["category"]))
        else:
            raise ValueError(f"unknown event record {rec!r}")
    return state


def rows_from_outcomes(plan: SessionPlan, outcomes: Sequence[TrialOutcome]) -> list[TrialRow]:
    return [
        TrialRow(
            experiment=plan.config.name,
            subject_or_run=plan.observer,
            session=1,
            block=o.trial.block,
            trial=o.trial.index,
            image_id=o.trial.image_id,
            condition=o.trial.condition,
            true_category=o.trial.true_category,
            response=o.response if o.response is not None else NO_RESPONSE,
            rt_ms=o.rt_ms,
            is_practice=o.trial.is_practice,
        )
        for o in outcomes
    ]


def save_event_log(events: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in events:
            fh.write(json.dumps(rec) + "\n")


def load_event_log(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
