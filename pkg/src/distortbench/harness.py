"""Experiment orchestration: configs, model adapters, sweeps and augmentation."""

from __future__ import annotations

import base64
import json
import math
import os
import select
import subprocess
from dataclasses import asdict, dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import distortions as dst
from .distortions import DistortionContext, DistortionSpec, apply_distortion, stream_seed
from .ingest import ManifestEntry, encode_png, load_image
from .pixels import preprocess
from .rng import sequence_generator
from .taxonomy import CATEGORIES, CategoryMap, NoEvidenceError, aggregate, decide
from .trials import ADAPTER_ERROR, NO_RESPONSE, TrialRow, write_trials

ADAPTER_PROTOCOL = "distortbench-adapter/1"


def format_condition(level) -> str:
    """Canonical condition string: numbers via %g, inf as "inf", strings as-is."""
    if isinstance(level, str):
        return level
    if isinstance(level, (int, np.integer)):
        return str(int(level))
    return f"{float(level):g}"


@dataclass(frozen=True)
class Family:
    """One manipulation family: its level grid and spec builder."""

    name: str
    levels: tuple
    build: Callable[[object], DistortionSpec]
    parse_level: Callable[[str], object] = staticmethod(float)

    def conditions(self) -> tuple[str, ...]:
        return tuple(format_condition(lv) for lv in self.levels)

    def spec_for(self, condition: str) -> DistortionSpec:
        return self.build(self.parse_level(condition))


def _float_or_inf(s: str) -> float:
    return math.inf if s == "inf" else float(s)


FAMILIES: dict[str, Family] = {
    f.name: f
    for f in (
        Family(
            "colour",
            ("colour", "greyscale"),
            lambda lv: dst.Colour() if lv == "colour" else dst.Greyscale(),
            parse_level=str,
        ),
        Family("uniform-noise", dst.UNIFORM_NOISE_WIDTHS, lambda w: dst.UniformNoise(w=w)),
        Family("salt-pepper", dst.SALT_PEPPER_PROBS, lambda p: dst.SaltPepper(p=p)),
        Family("contrast", dst.CONTRAST_LEVELS, lambda c: dst.Contrast(c=c)),
        Family("low-pass", dst.LOWPASS_SIGMAS, lambda s: dst.LowPass(sigma=s)),
        Family("high-pass", dst.HIGHPASS_SIGMAS, lambda s: dst.HighPass(sigma=s), parse_level=_float_or_inf),
        Family("phase-noise", dst.PHASE_NOISE_WIDTHS, lambda w: dst.PhaseNoise(w_degrees=w)),
        Family(
            "power-equalisation",
            ("original", "equalised"),
            lambda lv: dst.Greyscale() if lv == "original" else dst.PowerEqualise(),
            parse_level=str,
        ),
        Family(
            "opponent-colour",
            ("colour", "opponent"),
            lambda lv: dst.Colour() if lv == "colour" else dst.OpponentColour(),
            parse_level=str,
        ),
        Family("rotation", dst.ROTATION_ANGLES, lambda a: dst.Rotation(angle=int(a))),
        Family("eidolon-i", dst.EIDOLON_REACHES, lambda r: dst.Eidolon(reach=r, coherence=1.0)),
        Family("eidolon-ii", dst.EIDOLON_REACHES, lambda r: dst.Eidolon(reach=r, coherence=0.3)),
        Family("eidolon-iii", dst.EIDOLON_REACHES, lambda r: dst.Eidolon(reach=r, coherence=0.0)),
    )
}


def spec_for(family: str, condition: str) -> DistortionSpec:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    return FAMILIES[family].spec_for(condition)


@dataclass(frozen=True)
class ExperimentConfig:
    """Shape of one experiment: condition grid, counterbalancing and timing."""

    name: str
    family: str
    conditions: tuple[str, ...]
    trials_per_cell: int
    block_size: int
    practice_total: int = 0
    practice_blocks: int = 0
    side: int = 256
    enhanced_mask: bool = False
    refresh_hz: float = 60.0
    seed: int = 0

    @property
    def main_total(self) -> int:
        return self.trials_per_cell * len(CATEGORIES) * len(self.conditions)

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        known = set(FAMILIES[self.family].conditions())
        unknown = [c for c in self.conditions if c not in known]
        if unknown:
            raise ValueError(f"conditions {unknown} not in the {self.family} grid")
        if self.main_total % self.block_size:
            raise ValueError(f"block size {self.block_size} does not divide {self.main_total} main trials")
        if self.practice_blocks and self.practice_total % self.practice_blocks:
            raise ValueError("practice blocks must divide practice trials evenly")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, rec: dict) -> "ExperimentConfig":
        rec = dict(rec)
        rec["conditions"] = tuple(rec["conditions"])
        return cls(**rec)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=seed)


def _preset(name, family, per_cell, block, practice_total, practice_blocks, side, enhanced_mask):
    return ExperimentConfig(
        name=name,
        family=family,
        conditions=FAMILIES[family].conditions(),
        trials_per_cell=per_cell,
        block_size=block,
        practice_total=practice_total,
        practice_blocks=practice_blocks,
        side=side,
        enhanced_mask=enhanced_mask,
    )


# Trial counts, block sizes and practice totals of the benchmark experiments.
# First-batch experiments use 256 px stimuli and the plain mask; second-batch
# experiments use 224 px stimuli and the enhanced mask.
PRESETS: dict[str, ExperimentConfig] = {
    cfg.name: cfg
    for cfg in (
        _preset("colour", "colour", 40, 256, 320, 2, 256, False),
        _preset("uniform-noise", "uniform-noise", 10, 256, 256, 2, 256, False),
        _preset("contrast", "contrast", 10, 128, 256, 2, 256, False),
        _preset("eidolon-i", "eidolon-i", 10, 256, 384, 4, 256, False),
        _preset("eidolon-ii", "eidolon-ii", 10, 256, 384, 4, 256, False),
        _preset("eidolon-iii", "eidolon-iii", 10, 256, 384, 4, 256, False),
        _preset("opponent-colour", "opponent-colour", 35, 160, 224, 2, 224, True),
        _preset("low-pass", "low-pass", 10, 160, 256, 2, 224, True),
        _preset("high-pass", "high-pass", 10, 160, 256, 2, 224, True),
        _preset("phase-noise", "phase-noise", 10, 160, 224, 2, 224, True),
        _preset("power-equalisation", "power-equalisation", 35, 160, 224, 2, 224, True),
        _preset("rotation", "rotation", 20, 160, 256, 2, 224, True),
        # model-training family only; no human protocol exists for it
        _preset("salt-pepper", "salt-pepper", 10, 256, 0, 0, 224, True),
    )
}


# ---------------------------------------------------------------------------
# Model adapters


class AdapterError(RuntimeError):
    """The adapter failed to produce scores for a stimulus."""


class PrecomputedAdapter:
    """Scores read from a CSV: image_id,condition,score_0..score_N-1."""

    needs_pixels = False

    def __init__(self, path, n_scores: int = 1000):
        self.n_scores = n_scores
        self._table: dict[tuple[str, str], np.ndarray] = {}
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            expected = ["image_id", "condition"] + [f"score_{i}" for i in range(n_scores)]
            if header != expected:
                raise ValueError(f"unexpected precomputed-adapter header ({len(header)} columns)")
            for line in fh:
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split(",")
                key = (parts[0], parts[1])
                self._table[key] = np.asarray([float(v) for v in parts[2:]], dtype=np.float64)

    def __call__(self, image_id: str, condition: str, png_bytes: bytes | None = None) -> np.ndarray:
        try:
            return self._table[(image_id, condition)]
        except KeyError:
            raise AdapterError(f"no precomputed scores for ({image_id!r}, {condition!r})") from None


class ExternalProcessAdapter:
    """Line-delimited JSON over a child process's stdin/stdout.

    The child must print a handshake line {"protocol": "distortbench-adapter/1"}
    at startup, then answer each request {trial_id, png_base64} with
    {trial_id, scores}.
    """

    needs_pixels = True

    def __init__(self, argv: Sequence[str], timeout: float = 30.0):
        self.argv = list(argv)
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None

    def _start(self) -> None:
        self._proc = subprocess.Popen(
            self.argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        handshake = json.loads(self._readline())
        if handshake.get("protocol") != ADAPTER_PROTOCOL:
            raise AdapterError(f"bad adapter handshake: {handshake!r}")

    def _readline(self) -> str:
        assert self._proc is not None and self._proc.stdout is not None
        ready, _, _ = select.select([self._proc.stdout], [], [], self.timeout)
        if not ready:
            raise AdapterError(f"adapter timed out after {self.timeout}s")
        line = self._proc.stdout.readline()
        if not line:
            raise AdapterError("adapter closed its output")
        return line

    def __call__(self, image_id: str, condition: str, png_bytes: bytes | None) -> np.ndarray:
        if png_bytes is None:
            raise AdapterError("external adapters need rendered stimuli")
        if self._proc is None:
            self._start()
        assert self._proc is not None and self._proc.stdin is not None
        trial_id = f"{image_id}@{condition}"
        request = {"trial_id": trial_id, "png_base64": base64.b64encode(png_bytes).decode("ascii")}
        self._proc.stdin.write(json.dumps(request) + "\n")
        self._proc.stdin.flush()
        response = json.loads(self._readline())
        if response.get("trial_id") != trial_id:
            raise AdapterError(f"adapter answered for {response.get('trial_id')!r}, expected {trial_id!r}")
        return np.asarray(response["scores"], dtype=np.float64)

    def close(self) -> None:
        if self._proc is not None:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
            self._proc = None


# ---------------------------------------------------------------------------
# Model experiments


@dataclass(frozen=True)
class ModelTrial:
    trial: int
    image_id: str
    path: str
    category: str
    condition: str


def plan_model_trials(config: ExperimentConfig, corpus: Sequence[ManifestEntry]) -> list[ModelTrial]:
    """Sample trials_per_cell images per category, crossed with all conditions.

    Sampling is without replacement within the experiment: the per-category
    images are distinct, and each is evaluated once per condition (the
    standard model protocol, unlike the humans' one-condition-per-image
    sessions). Deterministic given config.seed, independent of corpus order.
    """
    config.validate()
    pools: dict[str, list[ManifestEntry]] = {c: [] for c in CATEGORIES}
    for entry in corpus:
        if entry.category not in pools:
            raise ValueError(f"unknown category {entry.category!r}")
        pools[entry.category].append(entry)

    trials: list[ModelTrial] = []
    index = 0
    for category in CATEGORIES:
        entries = sorted(pools[category], key=lambda e: e.image_id)
        if len(entries) < config.trials_per_cell:
            raise ValueError(
                f"category {category!r} has {len(entries)} images, needs {config.trials_per_cell}"
            )
        gen = sequence_generator(config.seed, f"model-plan/{category}")
        chosen = [entries[i] for i in gen.permutation(len(entries))[: config.trials_per_cell]]
        for entry in chosen:
            for condition in config.conditions:
                trials.append(ModelTrial(index, entry.image_id, entry.path, category, condition))
                index += 1
    return trials


def render_stimulus(
    entry_path: str, image_id: str, config: ExperimentConfig, condition: str, context: DistortionContext
) -> bytes:
    """Preprocess + distort one stimulus and return PNG bytes."""
    img = preprocess(load_image(entry_path), config.side)
    spec = spec_for(config.family, condition)
    seed = stream_seed(config.seed, image_id, spec)
    return encode_png(apply_distortion(img, spec, seed, context))


def run_model_experiment(
    config: ExperimentConfig,
    adapter,
    corpus: Sequence[ManifestEntry],
    cmap: CategoryMap,
    out_csv,
    run_id: str = "model",
    context: DistortionContext | None = None,
    limit: int | None = None,
    resume: bool = True,
) -> dict:
    """Run every planned trial through the adapter and write the raw-trial CSV.

    Progress is journaled after every trial, so an interrupted run resumed
    with the same arguments produces the identical CSV. ``limit`` stops after
    that many new trials (used to exercise resumption).
    """
    trials = plan_model_trials(config, corpus)
    context = context or DistortionContext()

    journal_path = str(out_csv) + ".journal.jsonl"
    done: dict[int, dict] = {}
    if resume and os.path.exists(journal_path):
        with open(journal_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    done[rec["trial"]] = rec

    n_errors = sum(1 for rec in done.values() if rec["response"] == ADAPTER_ERROR)
    n_no_evidence = sum(1 for rec in done.values() if rec.get("no_evidence"))
    n_new = 0
    with open(journal_path, "a", encoding="utf-8") as journal:
        for trial in trials:
            if trial.trial in done:
                continue
            if limit is not None and n_new >= limit:
                break
            rec = {"trial": trial.trial}
            try:
                png = (
                    render_stimulus(trial.path, trial.image_id, config, trial.condition, context)
                    if adapter.needs_pixels
                    else None
                )
                scores = np.asarray(adapter(trial.image_id, trial.condition, png), dtype=np.float64)
                if scores.shape != (cmap.n_labels,) or np.any(scores < 0):
                    raise AdapterError(f"adapter returned invalid scores of shape {scores.shape}")
                try:
                    rec["response"] = decide(aggregate(scores, cmap))
                except NoEvidenceError:
                    rec["response"] = NO_RESPONSE
                    rec["no_evidence"] = True
                    n_no_evidence += 1
            except AdapterError as exc:
                rec["response"] = ADAPTER_ERROR
                rec["error"] = str(exc)
                n_errors += 1
            journal.write(json.dumps(rec) + "\n")
            journal.flush()
            done[trial.trial] = rec
            n_new += 1

    finished = len(done) == len(trials)
    if finished:
        rows = [
            TrialRow(
                experiment=config.name,
                subject_or_run=run_id,
                session=1,
                block=trial.trial // config.block_size + 1,
                trial=trial.trial,
                image_id=trial.image_id,
                condition=trial.condition,
                true_category=trial.category,
                response=done[trial.trial]["response"],
                rt_ms=None,
                is_practice=False,
            )
            for trial in trials
        ]
        write_trials(rows, out_csv)
        os.remove(journal_path)

    return {
        "finished": finished,
        "n_trials": len(trials),
        "n_completed": len(done),
        "n_adapter_errors": n_errors,
        "n_no_evidence": n_no_evidence,
        "csv": str(out_csv) if finished else None,
    }


# ---------------------------------------------------------------------------
# Training-time augmentation


@dataclass(frozen=True)
class AugmentationPolicy:
    """Which manipulations training may draw, and their level grids.

    Exactly one manipulation is applied per sample; the manipulation is drawn
    uniformly over the enabled set, then its level uniformly over the grid.
    """

    manipulations: tuple[tuple[str, tuple], ...]  # (name, levels); levels may be (None,)

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.manipulations)

    def levels_of(self, name: str) -> tuple:
        for n, levels in self.manipulations:
            if n == name:
                return levels
        raise KeyError(name)


# Families suitable for training-time augmentation: everything parametric plus
# greyscale and unperturbed. Eidolon rendering is far too slow for training
# pipelines and stays out by default.
TRAINABLE_FAMILIES = (
    "uniform-noise",
    "salt-pepper",
    "contrast",
    "low-pass",
    "high-pass",
    "phase-noise",
    "rotation",
)


def default_augmentation_policy(exclude: Sequence[str] = ()) -> AugmentationPolicy:
    manipulations: list[tuple[str, tuple]] = [("unperturbed", (None,)), ("greyscale", (None,))]
    manipulations += [(name, FAMILIES[name].levels) for name in TRAINABLE_FAMILIES]
    kept = tuple((n, lv) for n, lv in manipulations if n not in set(exclude))
    return AugmentationPolicy(kept)


def sample_augmentation(policy: AugmentationPolicy, rng: np.random.Generator) -> tuple[str, object]:
    """Draw (manipulation, level), both uniform."""
    names = policy.names()
    if not names:
        raise ValueError("augmentation policy is empty")
    name = names[rng.integers(len(names))]
    levels = policy.levels_of(name)
    return name, levels[rng.integers(len(levels))]


def augmentation_spec(name: str, level) -> DistortionSpec | None:
    """Spec for one augmentation draw; None means leave the sample unperturbed."""
    if name == "unperturbed":
        return None
    if name == "greyscale":
        return dst.Greyscale()
    return FAMILIES[name].build(level)


def class_weights(counts: Sequence[int]) -> np.ndarray:
    """Loss weights proportional to 1/count, normalized to mean weight 1.

    Equal counts give all-ones; counts (100, 200) give (4/3, 2/3); scaling
    all counts leaves the weights unchanged.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 1 or counts.size == 0:
        raise ValueError("counts must be a nonempty 1-D sequence")
    if np.any(counts <= 0):
        raise ValueError("every class needs a positive sample count")
    w = 1.0 / counts
    return w * (counts.size / w.sum())


def training_config_preset(epochs: int = 100) -> dict:
    """Reference training schedule for external trainers (no training happens here)."""
    if epochs == 100:
        decay = [30, 60, 80, 90]
    elif epochs == 200:
        decay = [60, 120, 160, 180]
    else:
        raise ValueError("presets exist for 100 or 200 epochs")
    return {
        "architecture": "resnet50-16way",
        "epochs": epochs,
        "optimizer": "sgd",
        "momentum": 0.997,
        "batch_size": 64,
        "initial_learning_rate": 0.025,
        "lr_decay_factor": 0.1,
        "lr_decay_epochs": decay,
        "weight_init": {"kind": "truncated_normal", "mean": 0.0, "stddev": "1/sqrt(n_out)"},
        "loss_weighting": "inverse-class-frequency (see class_weights)",
    }


def learning_rate_at(preset: dict, epoch: int) -> float:
    """Learning rate in force during the given (1-based) epoch."""
    decays = sum(1 for d in preset["lr_decay_epochs"] if epoch > d)
    return preset["initial_learning_rate"] * preset["lr_decay_factor"] ** decays
