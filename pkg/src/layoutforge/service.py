"""HTTP service wrapping the generation and retargeting pipeline.

Requests create durable jobs which run in the background; clients poll
GET /api/jobs/{id} and fetch artifacts from /api/results/{id}/...  once
done.  Domain failures (bad element counts, missing checkpoints) become
failed jobs with messages; only malformed request bodies get HTTP errors.
"""

from __future__ import annotations

import dataclasses
import json
import os
import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import BackgroundTasks, FastAPI, HTTPException, Response
from pydantic import BaseModel, ConfigDict, Field

from .core import Canvas, ValidationError, assign_reading_orders
from .data import element_specs_from_dicts, layout_from_dict, layout_to_dict
from .jobs import Job, JobError, JobStore
from .model import ModelCheckpoint, load_checkpoint
from .pipeline import retarget_layout, run_generation_pipeline, save_candidate_set
from .render import StyleConfig, export_svg

DEFAULT_HOME = "~/.layoutforge"


def layoutforge_home() -> Path:
    return Path(os.environ.get("LAYOUTFORGE_HOME", DEFAULT_HOME)).expanduser()


@dataclass
class ServiceSettings:
    home: Path = field(default_factory=layoutforge_home)
    checkpoints: dict[str, Path] = field(default_factory=dict)
    adjust_checkpoint: Path | None = None
    static_dir: Path | None = None

    def __post_init__(self):
        self.home = Path(self.home)
        self.checkpoints = {k: Path(v) for k, v in self.checkpoints.items()}
        if self.adjust_checkpoint is not None:
            self.adjust_checkpoint = Path(self.adjust_checkpoint)


# ---------------------------------------------------------------------------
# request/response schemas
# ---------------------------------------------------------------------------


class ElementIn(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    class_name: str = Field(alias="class")
    s: float
    r: float = 0.0
    order: int | None = None


class CanvasIn(BaseModel):
    width_px: int
    height_px: int
    aspect_class: str


class GenerateRequest(BaseModel):
    elements: list[ElementIn]
    canvas: CanvasIn
    k: int = 5
    grid_n: int = 8
    seed: int = 0
    rank_order: str = "asc"
    idempotency_key: str | None = None


class RetargetRequest(BaseModel):
    layout: dict
    target_canvas: CanvasIn
    seed: int = 0
    idempotency_key: str | None = None


class JobOut(BaseModel):
    id: str
    kind: str
    status: str
    error: str | None = None
    seed: int | None = None
    created_at: float
    updated_at: float
    has_result: bool = False


def _job_out(job: Job) -> JobOut:
    return JobOut(
        id=job.id,
        kind=job.kind,
        status=job.status,
        error=job.error,
        seed=job.payload.get("seed"),
        created_at=job.created_at,
        updated_at=job.updated_at,
        has_result=job.result_ref is not None,
    )


# ---------------------------------------------------------------------------
# checkpoint loading
# ---------------------------------------------------------------------------


class CheckpointCache:
    """Lazy, immutable snapshots shared by all requests."""

    def __init__(self, settings: ServiceSettings):
        self.settings = settings
        self._lock = threading.Lock()
        self._loaded: dict[str, ModelCheckpoint] = {}

    def generation(self, aspect_class: str) -> ModelCheckpoint:
        path = self.settings.checkpoints.get(aspect_class)
        if path is None:
            raise ValidationError(
                f"no checkpoint configured for aspect class {aspect_class!r}"
            )
        return self._load(f"gen:{aspect_class}", path)

    def adjustment(self) -> ModelCheckpoint:
        path = self.settings.adjust_checkpoint
        if path is None:
            raise ValidationError("no adjustment checkpoint configured")
        return self._load("adjust", path)

    def _load(self, key: str, path: Path) -> ModelCheckpoint:
        with self._lock:
            if key not in self._loaded:
                self._loaded[key] = load_checkpoint(path)
            return self._loaded[key]


# ---------------------------------------------------------------------------
# job execution
# ---------------------------------------------------------------------------


def _svg_style() -> StyleConfig:
    return StyleConfig(show_order_numerals=True)


def execute_generate(store: JobStore, cache: CheckpointCache, job_id: str) -> None:
    try:
        store.update(job_id, "running")
    except JobError:
        return  # someone else already ran it
    job = store.get(job_id)
    try:
        payload = job.payload
        canvas = Canvas(**payload["canvas"])
        specs = element_specs_from_dicts(payload["elements"])
        checkpoint = cache.generation(canvas.aspect_class)
        cset = run_generation_pipeline(
            specs,
            checkpoint,
            canvas,
            grid_n=payload.get("grid_n", 8),
            k=payload.get("k", 5),
            seed=payload.get("seed", 0),
            rank_order=payload.get("rank_order", "asc"),
        )
        rdir = store.result_dir(job_id, create=True)
        save_candidate_set(cset, rdir / "candidate_set.json")
        for i, rec in enumerate(cset.records):
            (rdir / f"layout_{i}.svg").write_text(
                export_svg(rec.layout, _svg_style()), encoding="utf-8"
            )
        store.update(job_id, "done", result_ref=str(rdir))
    except Exception as exc:  # domain errors become failed jobs, not 500s
        store.update(job_id, "failed", error=str(exc))


def execute_retarget(store: JobStore, cache: CheckpointCache, job_id: str) -> None:
    try:
        store.update(job_id, "running")
    except JobError:
        return
    job = store.get(job_id)
    try:
        payload = job.payload
        source = layout_from_dict(payload["layout"])
        target = Canvas(**payload["target_canvas"])
        seed = payload.get("seed", 0)
        checkpoint = cache.adjustment()
        result = retarget_layout(source, target, checkpoint, seed=seed)
        source_orders = (
            [el.order for el in source.elements]
            if all(el.order is not None for el in source.elements)
            else assign_reading_orders(source)
        )
        derived = assign_reading_orders(result)
        matches = sum(1 for a, b in zip(source_orders, derived) if a == b)
        doc = {
            "layout": layout_to_dict(result),
            "seed": seed,
            "source_orders": source_orders,
            "derived_orders": derived,
            "order_retention": matches / len(source_orders),
        }
        rdir = store.result_dir(job_id, create=True)
        (rdir / "result.json").write_text(
            json.dumps(doc, indent=2) + "\n", encoding="utf-8"
        )
        (rdir / "layout_0.svg").write_text(
            export_svg(result, _svg_style()), encoding="utf-8"
        )
        # side-by-side previews want numerals on the source pane too
        numbered = dataclasses.replace(
            source,
            elements=[
                dataclasses.replace(el, order=o)
                for el, o in zip(source.elements, source_orders)
            ],
        )
        (rdir / "source.svg").write_text(
            export_svg(numbered, _svg_style()), encoding="utf-8"
        )
        store.update(job_id, "done", result_ref=str(rdir))
    except Exception as exc:
        store.update(job_id, "failed", error=str(exc))


_EXECUTORS = {"generate": execute_generate, "retarget": execute_retarget}


# ---------------------------------------------------------------------------
# app factory
# ---------------------------------------------------------------------------


def create_app(settings: ServiceSettings | None = None) -> FastAPI:
    settings = settings or ServiceSettings()
    store = JobStore(settings.home / "jobs")
    cache = CheckpointCache(settings)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        # jobs queued when the service last stopped still owe an answer
        for job in store.list_jobs("queued"):
            executor = _EXECUTORS.get(job.kind)
            if executor:
                executor(store, cache, job.id)
        yield

    app = FastAPI(title="layoutforge", lifespan=lifespan)
    app.state.store = store
    app.state.settings = settings

    @app.post("/api/generate", response_model=JobOut)
    def post_generate(req: GenerateRequest, background: BackgroundTasks) -> JobOut:
        payload = req.model_dump(by_alias=True, exclude={"idempotency_key"})
        job = store.create("generate", payload, req.idempotency_key)
        if job.status == "queued":
            background.add_task(execute_generate, store, cache, job.id)
        return _job_out(job)

    @app.post("/api/retarget", response_model=JobOut)
    def post_retarget(req: RetargetRequest, background: BackgroundTasks) -> JobOut:
        payload = req.model_dump(exclude={"idempotency_key"})
        job = store.create("retarget", payload, req.idempotency_key)
        if job.status == "queued":
            background.add_task(execute_retarget, store, cache, job.id)
        return _job_out(job)

    @app.get("/api/jobs/{job_id}", response_model=JobOut)
    def get_job(job_id: str) -> JobOut:
        try:
            return _job_out(store.get(job_id))
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")

    def _result_dir(job_id: str) -> Path:
        try:
            job = store.get(job_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id}")
        if job.status != "done" or job.result_ref is None:
            raise HTTPException(
                status_code=409, detail=f"job {job_id} is {job.status}, not done"
            )
        return Path(job.result_ref)

    @app.get("/api/results/{job_id}/layouts")
    def get_layouts(job_id: str) -> Response:
        rdir = _result_dir(job_id)
        for name in ("candidate_set.json", "result.json"):
            path = rdir / name
            if path.exists():
                return Response(
                    content=path.read_text(encoding="utf-8"),
                    media_type="application/json",
                )
        raise HTTPException(status_code=404, detail="result document missing")

    @app.get("/api/results/{job_id}/svg/{index}")
    def get_svg(job_id: str, index: str) -> Response:
        rdir = _result_dir(job_id)
        # "source" fetches the annotated source pane of a retarget result
        name = "source.svg" if index == "source" else f"layout_{index}.svg"
        path = rdir / name
        if not index.isdigit() and index != "source" or not path.exists():
            raise HTTPException(status_code=404, detail=f"no rendering {index}")
        return Response(
            content=path.read_text(encoding="utf-8"), media_type="image/svg+xml"
        )

    @app.get("/api/health")
    def get_health() -> dict:
        return {
            "status": "ok",
            "aspect_classes": sorted(
                k for k, v in settings.checkpoints.items() if v.exists()
            ),
            "adjustment": bool(
                settings.adjust_checkpoint and settings.adjust_checkpoint.exists()
            ),
        }

    if settings.static_dir is not None and Path(settings.static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount(
            "/", StaticFiles(directory=settings.static_dir, html=True), name="ui"
        )

    return app
