"""FastAPI application exposing the toolkit: weight solves, training runs, evaluation and checks."""
from __future__ import annotations

import threading
import uuid
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..fair_moo import SolverConfig, mpd_weights_closed, mpd_weights_oracle
from ..harness import compare_strategies, run_training
from ..harness.checks import export_synth, gradcheck
from ..harness.training import RunIOError, evaluate_checkpoint
from .schemas import (
    CompareRequest,
    CompareResponse,
    EvalRequest,
    GradcheckRequest,
    GradcheckResponse,
    GramRequest,
    JobStatus,
    RegionMetrics,
    RunSummary,
    SynthRequest,
    SynthResponse,
    TrainRequest,
    WeightsResponse,
)


def _fail(exc: Exception) -> HTTPException:
    if isinstance(exc, (RunIOError, FileNotFoundError)):
        return HTTPException(500 if isinstance(exc, RunIOError) else 404, str(exc))
    return HTTPException(422, f"{type(exc).__name__}: {exc}")


def solve(req: GramRequest) -> WeightsResponse:
    cfg = SolverConfig(eps_reg=req.eps_reg, w_floor=req.w_floor)
    K = np.asarray(req.entries, dtype=np.float64)
    result = (mpd_weights_oracle if req.oracle else mpd_weights_closed)(K, cfg)
    return WeightsResponse(w=result.w.tolist(), residual=result.residual, floor_applied=result.floor_applied)


def train(req: TrainRequest) -> RunSummary:
    record = run_training(req.config, write=req.write)
    summary = record.summary()
    summary.pop("config")
    return RunSummary(**summary)


class JobQueue:
    """Training jobs run one at a time on a single worker thread."""

    def __init__(self):
        self._pool = ThreadPoolExecutor(max_workers=1)
        self._jobs: dict[str, JobStatus] = {}
        self._lock = threading.Lock()

    def submit(self, req: TrainRequest) -> JobStatus:
        job = JobStatus(id=uuid.uuid4().hex, state="queued")
        with self._lock:
            self._jobs[job.id] = job
        self._pool.submit(self._run, job.id, req)
        return job

    def _set(self, job_id: str, **fields) -> None:
        with self._lock:
            self._jobs[job_id] = self._jobs[job_id].model_copy(update=fields)

    def _run(self, job_id: str, req: TrainRequest) -> None:
        self._set(job_id, state="running")
        try:
            self._set(job_id, state="done", result=train(req))
        except Exception as exc:  # reported through the job status
            self._set(job_id, state="failed", error=f"{type(exc).__name__}: {exc}")

    def get(self, job_id: str) -> JobStatus | None:
        with self._lock:
            return self._jobs.get(job_id)


def create_app() -> FastAPI:
    app = FastAPI(title="fairmoo", version=__version__)
    jobs = JobQueue()

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/solve-weights", response_model=WeightsResponse)
    def solve_weights(req: GramRequest) -> WeightsResponse:
        try:
            return solve(req)
        except (ValueError, ArithmeticError) as exc:
            raise _fail(exc) from exc

    @app.post("/train", response_model=RunSummary)
    def train_sync(req: TrainRequest) -> RunSummary:
        try:
            return train(req)
        except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
            raise _fail(exc) from exc

    @app.post("/jobs/train", response_model=JobStatus, status_code=202)
    def train_async(req: TrainRequest) -> JobStatus:
        return jobs.submit(req)

    @app.get("/jobs/{job_id}", response_model=JobStatus)
    def job_status(job_id: str) -> JobStatus:
        job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"no job {job_id}")
        return job

    @app.post("/eval", response_model=RegionMetrics)
    def eval_checkpoint(req: EvalRequest) -> RegionMetrics:
        try:
            return RegionMetrics(**evaluate_checkpoint(req.config, req.checkpoint))
        except (ValueError, ArithmeticError, OSError) as exc:
            raise _fail(exc) from exc

    @app.post("/compare", response_model=CompareResponse)
    def compare(req: CompareRequest) -> CompareResponse:
        try:
            table = compare_strategies(req.configs, req.seeds, req.out_root)
        except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
            raise _fail(exc) from exc
        return CompareResponse(**table.as_dict(), table=table.format())

    @app.post("/synth", response_model=SynthResponse)
    def synth(req: SynthRequest) -> SynthResponse:
        try:
            return SynthResponse(**export_synth(req.count, req.seed, req.out_dir, req.image_size,
                                                req.latent_factor, req.eval_count))
        except (ValueError, OSError) as exc:
            raise _fail(exc) from exc

    @app.post("/gradcheck", response_model=GradcheckResponse)
    def grad_check(req: GradcheckRequest) -> GradcheckResponse:
        return GradcheckResponse(**gradcheck(req.seed, req.count, req.tol))

    return app


app = create_app()
