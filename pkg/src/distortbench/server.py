"""HTTP API serving timed forced-choice sessions to the browser trial runner.

Stimuli are rendered to PNG when the session is created, so a trial's pixels
are fixed before any timing-critical code runs. The browser owns frame-level
presentation; this server validates the reported phase durations and flags
(but keeps) trials whose stimulus duration is off by more than two frames.
Sessions persist as a plan plus an append-only event log; the export CSV is
derived from the log, never stored as primary data.
"""

from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass, field
from typing import Any

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .distortions import DistortionContext, apply_distortion, stream_seed
from .harness import PRESETS, ExperimentConfig, spec_for
from .ingest import DatasetStats, ManifestEntry, ensure_dir, load_image, read_manifest, save_png
from .pixels import DEFAULT_MEAN_GREY, preprocess
from .rng import StreamSeed
from .session import (
    RESPONSE_GRID_ORDER,
    STIMULUS_MS,
    SessionPlan,
    build_plan,
    phase_timings,
)
from .spectral import load_spectrum, pink_noise_mask
from .taxonomy import CATEGORY_INDEX
from .trials import CSV_FIELDS, NO_RESPONSE, TrialRow, write_trials
from .colour import load_monitor

MASK_DIGEST = "pink-mask"


class CreateSessionRequest(BaseModel):
    config: str | dict
    seed: int
    observer: str = "observer"


class TrialPost(BaseModel):
    trial_index: int
    response: str | None = None
    rt_ms: int | None = None
    reported_timings: dict[str, float] | None = None


@dataclass
class LiveSession:
    plan: SessionPlan
    directory: str
    records: dict[int, dict] = field(default_factory=dict)
    flagged: list[int] = field(default_factory=list)

    @property
    def next_index(self) -> int:
        i = 0
        while i in self.records:
            i += 1
        return i


def _error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


def create_app(
    corpus_manifest: str,
    data_dir: str,
    stats: DatasetStats | None = None,
    stats_path: str | None = None,
    spectrum_path: str | None = None,
    monitor_path: str | None = None,
) -> FastAPI:
    """Build the session-serving app around one corpus."""
    corpus: list[ManifestEntry] = read_manifest(corpus_manifest)
    if stats is None and stats_path:
        from .ingest import load_stats

        stats = load_stats(stats_path)
    mean_grey = stats.mean_grey if stats else DEFAULT_MEAN_GREY
    context = DistortionContext(
        mean_grey=mean_grey,
        amplitude_target=load_spectrum(spectrum_path) if spectrum_path else None,
        monitor=load_monitor(monitor_path) if monitor_path else None,
    )
    ensure_dir(data_dir)

    app = FastAPI(title="distortbench session API")
    sessions: dict[str, LiveSession] = {}

    @app.exception_handler(HTTPException)
    async def _http_error(request: Request, exc: HTTPException):
        detail = exc.detail
        if not isinstance(detail, dict) or "code" not in detail:
            detail = {"code": "error", "message": str(detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    def _resolve_config(spec: str | dict) -> ExperimentConfig:
        if isinstance(spec, str):
            if spec not in PRESETS:
                raise _error(400, "unknown_preset", f"no preset named {spec!r}")
            return PRESETS[spec]
        try:
            cfg = ExperimentConfig.from_json(spec)
            cfg.validate()
            return cfg
        except (TypeError, ValueError, KeyError) as exc:
            raise _error(400, "bad_config", str(exc))

    def _render_session(live: LiveSession) -> None:
        stim_dir = os.path.join(live.directory, "stimuli")
        ensure_dir(stim_dir)
        cfg = live.plan.config
        decoded: dict[str, Any] = {}
        for trial in live.plan.trials:
            if trial.image_id not in decoded:
                decoded[trial.image_id] = preprocess(load_image(trial.path), cfg.side)
            spec = spec_for(cfg.family, trial.condition)
            seed = stream_seed(live.plan.seed, trial.image_id, spec)
            stimulus = apply_distortion(decoded[trial.image_id], spec, seed, context)
            save_png(stimulus, os.path.join(stim_dir, f"{trial.index:05d}.png"))
            mask_seed = StreamSeed(live.plan.seed, f"mask/{trial.index}", MASK_DIGEST)
            mask = pink_noise_mask(cfg.side, mask_seed, enhance=cfg.enhanced_mask, mean_grey=mean_grey)
            save_png(mask, os.path.join(stim_dir, f"{trial.index:05d}-mask.png"))

    def _persist_event(live: LiveSession, record: dict) -> None:
        with open(os.path.join(live.directory, "events.jsonl"), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")

    def _load_session(session_id: str) -> LiveSession:
        if session_id in sessions:
            return sessions[session_id]
        directory = os.path.join(data_dir, session_id)
        plan_path = os.path.join(directory, "plan.json")
        if not os.path.exists(plan_path):
            raise _error(404, "unknown_session", f"no session {session_id!r}")
        with open(plan_path, encoding="utf-8") as fh:
            live = LiveSession(SessionPlan.from_json(json.load(fh)), directory)
        events_path = os.path.join(directory, "events.jsonl")
        if os.path.exists(events_path):
            with open(events_path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        rec = json.loads(line)
                        live.records[rec["trial_index"]] = rec
                        if rec.get("flagged"):
                            live.flagged.append(rec["trial_index"])
        sessions[session_id] = live
        return live

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        cfg = _resolve_config(req.config)
        try:
            plan = build_plan(cfg, corpus, req.seed, observer=req.observer)
        except ValueError as exc:
            raise _error(400, "plan_failure", str(exc))
        session_id = uuid.uuid4().hex[:12]
        directory = os.path.join(data_dir, session_id)
        ensure_dir(directory)
        live = LiveSession(plan, directory)
        with open(os.path.join(directory, "plan.json"), "w", encoding="utf-8") as fh:
            json.dump(plan.to_json(), fh)
        _render_session(live)
        sessions[session_id] = live
        return {
            "session_id": session_id,
            "n_trials": len(plan.trials),
            "background_grey": mean_grey,
            "phase_timings": phase_timings(),
            "response_grid": list(RESPONSE_GRID_ORDER),
        }

    @app.get("/sessions/{session_id}/next")
    def next_trial(session_id: str):
        live = _load_session(session_id)
        index = live.next_index
        payload: dict[str, Any] = {"done": index >= len(live.plan.trials)}
        if live.records:
            last = live.plan.trials[max(live.records)]
            boundary = payload["done"] or (
                (last.is_practice, last.block)
                != (live.plan.trials[index].is_practice, live.plan.trials[index].block)
            )
            if boundary:
                block = [
                    (live.plan.trials[i], r)
                    for i, r in live.records.items()
                    if live.plan.trials[i].block == last.block
                    and live.plan.trials[i].is_practice == last.is_practice
                ]
                correct = sum(1 for t, r in block if r["response"] == t.true_category)
                payload["block_feedback"] = {"block": last.block, "accuracy": correct / len(block)}
        if payload["done"]:
            return payload
        trial = live.plan.trials[index]
        payload.update(
            trial_index=trial.index,
            block=trial.block,
            is_practice=trial.is_practice,
            stimulus_url=f"/stimuli/{session_id}-{trial.index:05d}.png",
            mask_url=f"/stimuli/{session_id}-{trial.index:05d}-mask.png",
            phase_timings=phase_timings(),
        )
        return payload

    @app.get("/stimuli/{stimulus_id}.png")
    def stimulus(stimulus_id: str):
        session_id, _, name = stimulus_id.partition("-")
        live = _load_session(session_id)
        path = os.path.join(live.directory, "stimuli", f"{name}.png")
        if not os.path.exists(path):
            raise _error(404, "unknown_stimulus", f"no stimulus {stimulus_id!r}")
        return FileResponse(path, media_type="image/png")

    @app.post("/sessions/{session_id}/trials")
    def post_trial(session_id: str, post: TrialPost):
        live = _load_session(session_id)
        if not 0 <= post.trial_index < len(live.plan.trials):
            raise _error(400, "bad_trial_index", f"trial_index {post.trial_index} out of range")
        if post.response is not None and post.response not in CATEGORY_INDEX:
            raise _error(400, "bad_response", f"unknown category {post.response!r}")
        if post.response is None and post.rt_ms is not None:
            raise _error(400, "bad_rt", "rt_ms must be null for no-response trials")
        if post.response is not None:
            if post.rt_ms is None or not 0 <= post.rt_ms <= phase_timings()["response_ms"]:
                raise _error(400, "bad_rt", "rt_ms must lie within the response window")

        record = {
            "trial_index": post.trial_index,
            "response": post.response,
            "rt_ms": post.rt_ms,
            "reported_timings": post.reported_timings,
        }
        existing = live.records.get(post.trial_index)
        if existing is not None:
            if {k: existing.get(k) for k in record} == record:
                return {"ok": True, "duplicate": True, "flagged": bool(existing.get("flagged"))}
            raise _error(409, "conflict", f"trial {post.trial_index} already recorded differently")
        if post.trial_index != live.next_index:
            raise _error(409, "out_of_order", f"expected trial {live.next_index} next")

        flagged = False
        timings = post.reported_timings or {}
        if "stimulus_ms" in timings:
            frame_ms = 1000.0 / live.plan.config.refresh_hz
            flagged = abs(timings["stimulus_ms"] - STIMULUS_MS) > 2 * frame_ms
        record["flagged"] = flagged
        if flagged:
            live.flagged.append(post.trial_index)
        live.records[post.trial_index] = record
        _persist_event(live, record)
        return {"ok": True, "duplicate": False, "flagged": flagged}

    @app.get("/sessions/{session_id}/export.csv")
    def export_csv(session_id: str):
        live = _load_session(session_id)
        rows = []
        for index in sorted(live.records):
            trial = live.plan.trials[index]
            rec = live.records[index]
            rows.append(
                TrialRow(
                    experiment=live.plan.config.name,
                    subject_or_run=live.plan.observer,
                    session=1,
                    block=trial.block,
                    trial=trial.index,
                    image_id=trial.image_id,
                    condition=trial.condition,
                    true_category=trial.true_category,
                    response=rec["response"] if rec["response"] is not None else NO_RESPONSE,
                    rt_ms=rec["rt_ms"],
                    is_practice=trial.is_practice,
                )
            )
        lines = [",".join(CSV_FIELDS)]
        lines += [",".join(r.to_csv_values()) for r in rows]
        return PlainTextResponse("\n".join(lines) + "\n", media_type="text/csv")

    @app.get("/sessions/{session_id}/report")
    def report(session_id: str):
        live = _load_session(session_id)
        return {
            "session_id": session_id,
            "observer": live.plan.observer,
            "n_trials": len(live.plan.trials),
            "n_recorded": len(live.records),
            "flagged_trials": sorted(live.flagged),
            "timing_rule": "stimulus duration flagged beyond 2 frames; flagged trials are kept",
        }

    return app


def export_plan_csv(plan: SessionPlan, records: dict[int, dict], path) -> None:
    """Write a completed session's records to the raw-trial CSV (offline helper)."""
    rows = [
        TrialRow(
            experiment=plan.config.name,
            subject_or_run=plan.observer,
            session=1,
            block=plan.trials[i].block,
            trial=i,
            image_id=plan.trials[i].image_id,
            condition=plan.trials[i].condition,
            true_category=plan.trials[i].true_category,
            response=rec["response"] if rec["response"] is not None else NO_RESPONSE,
            rt_ms=rec["rt_ms"],
            is_practice=plan.trials[i].is_practice,
        )
        for i, rec in sorted(records.items())
    ]
    write_trials(rows, path)
