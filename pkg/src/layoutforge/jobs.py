"""Durable job bookkeeping for the HTTP service.

Jobs live in an append-only JSONL log; every state change appends a full
snapshot and the latest line per id wins on replay.  Results are plain
files under results/<id>/ so a finished job survives restarts.  Status
only moves forward: queued -> running -> done | failed.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .core import ValidationError

STATUSES = ("queued", "running", "done", "failed")
_RANK = {"queued": 0, "running": 1, "done": 2, "failed": 2}


class JobError(ValidationError):
    pass


@dataclass
class Job:
    id: str
    kind: str  # generate | retarget | evaluate
    payload: dict
    status: str = "queued"
    result_ref: str | None = None
    error: str | None = None
    idempotency_key: str | None = None
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)

    def to_dict(self) -> dict:
        return asdict(self)


def _job_from_dict(doc: dict) -> Job:
    return Job(**doc)


class JobStore:
    """Append-only log of job snapshots plus per-job result directories."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.log_path = self.root / "jobs.log"
        self._lock = threading.Lock()
        self._jobs: dict[str, Job] = {}
        self._by_key: dict[str, str] = {}
        self._replay()

    def _replay(self) -> None:
        if not self.log_path.exists():
            return
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                job = _job_from_dict(json.loads(line))
                self._jobs[job.id] = job
                if job.idempotency_key:
                    self._by_key[job.idempotency_key] = job.id
        # a job caught mid-flight by a crash can never report back
        for job in self._jobs.values():
            if job.status == "running":
                job.status = "failed"
                job.error = "interrupted by service restart"
                job.updated_at = time.time()
                self._append(job)

    def _append(self, job: Job) -> None:
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(job.to_dict()) + "\n")

    def create(
        self, kind: str, payload: dict, idempotency_key: str | None = None
    ) -> Job:
        with self._lock:
            if idempotency_key and idempotency_key in self._by_key:
                return self._jobs[self._by_key[idempotency_key]]
            job = Job(
                id=uuid.uuid4().hex,
                kind=kind,
                payload=payload,
                idempotency_key=idempotency_key,
            )
            self._jobs[job.id] = job
            if idempotency_key:
                self._by_key[idempotency_key] = job.id
            self._append(job)
            return job

    def get(self, job_id: str) -> Job:
        with self._lock:
            if job_id not in self._jobs:
                raise KeyError(f"unknown job {job_id}")
            return self._jobs[job_id]

    def list_jobs(self, status: str | None = None) -> list[Job]:
        with self._lock:
            jobs = sorted(self._jobs.values(), key=lambda j: j.created_at)
        if status is not None:
            jobs = [j for j in jobs if j.status == status]
        return jobs

    def update(
        self,
        job_id: str,
        status: str,
        result_ref: str | None = None,
        error: str | None = None,
    ) -> Job:
        if status not in STATUSES:
            raise JobError(f"unknown status {status!r}")
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                raise KeyError(f"unknown job {job_id}")
            if _RANK[status] <= _RANK[job.status]:
                raise JobError(
                    f"job {job_id} cannot move {job.status} -> {status}"
                )
            if status == "done" and result_ref is None:
                raise JobError("done jobs need a result reference")
            if status == "failed" and not error:
                raise JobError("failed jobs need an error message")
            job.status = status
            if result_ref is not None:
                job.result_ref = result_ref
            if error is not None:
                job.error = error
            job.updated_at = time.time()
            self._append(job)
            return job

    def result_dir(self, job_id: str, create: bool = False) -> Path:
        path = self.root / "results" / job_id
        if create:
            path.mkdir(parents=True, exist_ok=True)
        return path
