"""HTTP service surface: verification and reward endpoints plus job
polling for large batches."""

from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, ValidationError

from . import reward as reward_mod
from .config import ServiceConfig
from .equiv import EquivConfig
from .sandbox import PoolTimeout
from .toolproto import ToolRegistry, default_registry
from .verifier import (
    ChatEndpoint,
    EndpointError,
    TaskFailure,
    VerificationTask,
    verify_batch,
)

__all__ = ["create_app", "SYNC_BATCH_LIMIT"]

SYNC_BATCH_LIMIT = 16


class TaskBody(BaseModel):
    question: str = ""
    candidate: str
    references: list[str] = Field(min_length=1)
    mode: str = "rubric"
    task_id: Optional[str] = None


class VerifyBody(BaseModel):
    tasks: list[TaskBody]
    include_transcript: bool = False


class RolloutBody(BaseModel):
    correct: bool
    tool_uses: int = Field(default=0, ge=0)
    logprob_new: Optional[list[float]] = None
    logprob_old: Optional[list[float]] = None


class GroupBody(BaseModel):
    prompt_id: str
    gold_answer: str = ""
    rollouts: list[RolloutBody]
    eps_low: float = reward_mod.EPS_LOW_DEFAULT
    eps_high: float = reward_mod.EPS_HIGH_DEFAULT


class RewardBody(BaseModel):
    groups: list[GroupBody]
    include_objective: bool = False


def _task_from_body(body: TaskBody) -> VerificationTask:
    return VerificationTask.make(
        question=body.question,
        candidate_text=body.candidate,
        references=body.references,
        mode=body.mode,
        task_id=body.task_id,
    )


def _verdict_payloads(results, include_transcript: bool) -> list[dict]:
    out = []
    for res in results:
        if isinstance(res, TaskFailure):
            out.append({"error": res.error, "task_id": res.task_id})
        else:
            out.append(res.to_dict(include_transcript=include_transcript))
    return out


def _reward_payload(body: RewardBody) -> list[dict]:
    groups = []
    for g in body.groups:
        if len(g.rollouts) < 2:
            raise ValueError(f"group {g.prompt_id!r} needs G >= 2")
        groups.append(
            reward_mod.RolloutGroup(
                prompt_id=g.prompt_id,
                gold_answer=g.gold_answer,
                rollouts=[
                    reward_mod.RolloutRecord(
                        correct=r.correct,
                        tool_uses=r.tool_uses,
                        logprob_new=r.logprob_new,
                        logprob_old=r.logprob_old,
                    )
                    for r in g.rollouts
                ],
                eps_low=g.eps_low,
                eps_high=g.eps_high,
            )
        )
    results = reward_mod.reward_batch(groups)
    if body.include_objective:
        for group, entry in zip(groups, results):
            has_lps = all(r.logprob_new is not None for r in group.rollouts)
            if entry["filter_status"] == "kept" and has_lps:
                entry["dapo_objective"] = reward_mod.dapo_objective(group)
    return results


def create_app(
    config: Optional[ServiceConfig] = None,
    endpoint: Optional[ChatEndpoint] = None,
    registry: Optional[ToolRegistry] = None,
    executor=None,
) -> FastAPI:
    config = config or ServiceConfig()
    equiv_cfg = EquivConfig(
        decimal_round_places=config.equiv.decimal_round_places,
        rel_tol=config.equiv.rel_tol,
        order_sensitive=config.equiv.order_sensitive,
        strip_units=config.equiv.strip_units,
    )
    if registry is None:
        registry = default_registry(executor)

    app = FastAPI(title="toolverify", version="0.1.0")
    jobs: dict[str, dict] = {}
    jobs_lock = threading.Lock()
    workers = ThreadPoolExecutor(max_workers=config.parallelism)

    @app.exception_handler(RequestValidationError)
    async def _schema_violation(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "schema violation", "detail": exc.errors()})

    def run_verify(tasks, include_transcript):
        results = verify_batch(
            tasks,
            endpoint=endpoint,
            parallelism=config.parallelism,
            registry=registry,
            equiv_cfg=equiv_cfg,
        )
        return _verdict_payloads(results, include_transcript)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "tools": registry.names()}

    @app.post("/v1/verify")
    def http_verify(body: VerifyBody):
        tasks = [_task_from_body(t) for t in body.tasks]
        if len(tasks) <= SYNC_BATCH_LIMIT:
            try:
                return {"verdicts": run_verify(tasks, body.include_transcript)}
            except EndpointError as exc:
                return JSONResponse(status_code=502, content={"error": str(exc)})
            except PoolTimeout as exc:
                return JSONResponse(status_code=503, content={"error": str(exc)})
        job_id = uuid.uuid4().hex
        with jobs_lock:
            jobs[job_id] = {"status": "running", "result": None}

        def run_job():
            try:
                result = run_verify(tasks, body.include_transcript)
                with jobs_lock:
                    jobs[job_id] = {"status": "done", "result": result}
            except Exception as exc:
                with jobs_lock:
                    jobs[job_id] = {"status": "failed", "result": str(exc)}

        workers.submit(run_job)
        return JSONResponse(status_code=202, content={"job_id": job_id})

    @app.get("/v1/jobs/{job_id}")
    def job_status(job_id: str):
        with jobs_lock:
            job = jobs.get(job_id)
        if job is None:
            return JSONResponse(status_code=404, content={"error": "unknown job"})
        if job["status"] == "running":
            return JSONResponse(status_code=202, content={"status": "running"})
        if job["status"] == "failed":
            return JSONResponse(status_code=500, content={"status": "failed", "error": job["result"]})
        return {"status": "done", "verdicts": job["result"]}

    @app.post("/v1/reward")
    def http_reward(body: RewardBody):
        try:
            return {"groups": _reward_payload(body)}
        except ValueError as exc:
            return JSONResponse(status_code=422, content={"error": str(exc)})

    return app
