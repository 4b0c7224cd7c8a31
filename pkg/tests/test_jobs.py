"""Durable job store: forward-only transitions, idempotency, replay."""

import json

import pytest

from layoutforge.jobs import JobError, JobStore


@pytest.fixture
def store(tmp_path):
    return JobStore(tmp_path / "jobs")


def test_create_queued(store):
    job = store.create("generate", {"seed": 1})
    assert job.status == "queued"
    assert job.error is None
    assert store.get(job.id) is job
    assert [j.id for j in store.list_jobs()] == [job.id]


def test_ids_unique(store):
    a = store.create("generate", {})
    b = store.create("generate", {})
    assert a.id != b.id


def test_idempotency_key_returns_same_job(store):
    a = store.create("generate", {"seed": 1}, idempotency_key="abc")
    b = store.create("generate", {"seed": 1}, idempotency_key="abc")
    c = store.create("generate", {"seed": 1}, idempotency_key="other")
    assert a.id == b.id
    assert c.id != a.id


def test_lifecycle_and_forward_only(store):
    job = store.create("generate", {})
    store.update(job.id, "running")
    store.update(job.id, "done", result_ref="somewhere")
    assert store.get(job.id).status == "done"
    with pytest.raises(JobError):
        store.update(job.id, "running")
    with pytest.raises(JobError):
        store.update(job.id, "failed", error="late")


def test_failed_terminal(store):
    job = store.create("retarget", {})
    store.update(job.id, "failed", error="boom")
    with pytest.raises(JobError):
        store.update(job.id, "done", result_ref="x")


def test_done_requires_result(store):
    job = store.create("generate", {})
    with pytest.raises(JobError, match="result"):
        store.update(job.id, "done")


def test_failed_requires_message(store):
    job = store.create("generate", {})
    with pytest.raises(JobError, match="error"):
        store.update(job.id, "failed")


def test_unknown_job(store):
    with pytest.raises(KeyError):
        store.get("nope")
    with pytest.raises(KeyError):
        store.update("nope", "running")


def test_unknown_status(store):
    job = store.create("generate", {})
    with pytest.raises(JobError, match="status"):
        store.update(job.id, "paused")


def test_restart_preserves_and_repairs(tmp_path):
    root = tmp_path / "jobs"
    store = JobStore(root)
    queued = store.create("generate", {"seed": 1})
    done = store.create("generate", {"seed": 2})
    store.update(done.id, "running")
    store.update(done.id, "done", result_ref="ref")
    stuck = store.create("retarget", {"seed": 3})
    store.update(stuck.id, "running")

    reloaded = JobStore(root)
    assert reloaded.get(queued.id).status == "queued"
    assert reloaded.get(done.id).status == "done"
    assert reloaded.get(done.id).result_ref == "ref"
    repaired = reloaded.get(stuck.id)
    assert repaired.status == "failed"
    assert "interrupt" in repaired.error


def test_replay_last_line_wins(tmp_path):
    root = tmp_path / "jobs"
    store = JobStore(root)
    job = store.create("generate", {})
    store.update(job.id, "running")
    store.update(job.id, "failed", error="x")
    lines = (root / "jobs.log").read_text().strip().splitlines()
    assert len(lines) == 3
    assert json.loads(lines[-1])["status"] == "failed"
    assert JobStore(root).get(job.id).status == "failed"


def test_payload_survives_replay(tmp_path):
    root = tmp_path / "jobs"
    JobStore(root).create("generate", {"elements": [1, 2], "seed": 9})
    job = JobStore(root).list_jobs()[0]
    assert job.payload == {"elements": [1, 2], "seed": 9}


def test_result_dir(store):
    job = store.create("generate", {})
    path = store.result_dir(job.id, create=True)
    assert path.is_dir()
    assert path.name == job.id


def test_list_filter(store):
    a = store.create("generate", {})
    b = store.create("generate", {})
    store.update(b.id, "running")
    assert [j.id for j in store.list_jobs("queued")] == [a.id]
    assert [j.id for j in store.list_jobs("running")] == [b.id]
