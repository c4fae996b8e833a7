"""HTTP annotation service driving the active-learning loop.

A single long-running loop instance serves prediction tasks for the
shortest remaining narrative, accepts corrections, persists them to an
append-only NDJSON log, and retrains in a background worker. The
serving models swap atomically when a retrain finishes; accepted
records are replayed on startup so annotations survive restarts.

API:
    GET  /api/tasks/next
    POST /api/tasks/{task_id}/submit
    POST /api/tasks/{task_id}/reopen
    POST /api/retrain
    GET  /api/retrain/{ticket}
    GET  /api/metrics
    GET  /api/tagset
"""

from __future__ import annotations

import json
import os
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from fastapi import Depends, FastAPI, Header, HTTPException
from pydantic import BaseModel

from .corpus import Narrative, Sentence, load_corpus
from .dictionary import TagDictionary
from .harness import ActiveLearningLoop
from .tags import ATOMIC_LABELS, Tag, TagError, parse_tag
from .taggers import Tagger, TrainData, make_tagger

RECORDS_FILE = "records.ndjson"


@dataclass
class ServiceConfig:
    data_dir: str = "glossa-service-data"
    base_dir: str | None = None      # gold annotated corpus directory
    test_dir: str | None = None      # narrative queue directory
    dictionary_tsv: str | None = None
    mono_dir: str | None = None
    taggers: tuple[str, ...] = ("crf-mod",)
    seed: int = 0
    auth_token: str | None = None
    port: int = 8077
    crf_max_iters: int = 100

    ENV_PREFIX = "GLOSSA_"

    @classmethod
    def load(cls, path=None) -> "ServiceConfig":
        """JSON config file, with GLOSSA_* environment overrides."""
        raw: dict = {}
        if path is not None:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        env_fields = {
            "data_dir": str, "base_dir": str, "test_dir": str,
            "dictionary_tsv": str, "mono_dir": str, "seed": int,
            "auth_token": str, "port": int, "crf_max_iters": int,
        }
        for name, cast in env_fields.items():
            value = os.environ.get(cls.ENV_PREFIX + name.upper())
            if value is not None:
                raw[name] = cast(value)
        taggers_env = os.environ.get(cls.ENV_PREFIX + "TAGGERS")
        if taggers_env is not None:
            raw["taggers"] = tuple(taggers_env.split(","))
        elif "taggers" in raw:
            raw["taggers"] = tuple(raw["taggers"])
        return cls(**raw)


class TaskState:
    PENDING = "pending"
    IN_REVIEW = "in_review"
    ACCEPTED = "accepted"


@dataclass
class Task:
    task_id: str
    narrative_id: str
    iteration: int
    tagger: str
    sentences: list[dict]
    status: str = TaskState.PENDING
    supersedes: str | None = None


@dataclass
class RetrainTicket:
    ticket: str
    status: str = "queued"           # queued | running | done | failed
    error: str | None = None
    completed_iteration: int | None = None


class AnnotationStore:
    """Append-only NDJSON record log."""

    def __init__(self, data_dir):
        self.path = Path(data_dir) / RECORDS_FILE
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, record: dict) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")
            fh.flush()
            os.fsync(fh.fileno())

    def records(self) -> list[dict]:
        if not self.path.exists():
            return []
        out = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out


class AnnotationService:
    """State machine over the loop plus persistence and a retrain worker."""

    def __init__(self, base_pool: list[Sentence], test_narratives: list[Narrative],
                 taggers: Sequence[Tagger],
                 make_train_data: Callable[[list[Sentence]], TrainData],
                 data_dir, seed: int = 0):
        self.loop = ActiveLearningLoop(base_pool, test_narratives, taggers,
                                       make_train_data, seed=seed)
        self.store = AnnotationStore(data_dir)
        self.lock = threading.RLock()
        self.model_version = 0
        self.tasks: dict[str, Task] = {}
        self.current_task_id: str | None = None
        self.tickets: dict[str, RetrainTicket] = {}
        self._ticket_counter = 0
        self._accepted_since_retrain = 0
        self._retrain_queue: "queue.Queue[str]" = queue.Queue()
        self._worker = threading.Thread(target=self._retrain_worker, daemon=True)
        self._worker_started = False
        self._replay()

    # -- startup -------------------------------------------------------------

    def _replay(self) -> None:
        """Rebuild loop state from the append-only record log."""
        for record in self.store.records():
            tags = [[parse_tag(t) for t in sent] for sent in record["tags"]]
            if record.get("supersedes"):
                self.loop.replace_corrections(record["narrative_id"], tags)
            else:
                self.loop.propose()
                self.loop.accept(tags)
                self.model_version += 1
        self._ensure_current_task()

    def _ensure_worker(self) -> None:
        if not self._worker_started:
            self._worker.start()
            self._worker_started = True

    # -- task lifecycle --------------------------------------------------------

    def _ensure_current_task(self) -> None:
        """Materialize the proposal for the next narrative (trains models
        on first call after a pool change)."""
        if self.loop.done:
            self.current_task_id = None
            return
        proposal = self.loop.propose()
        task_id = f"task-{proposal.iteration:03d}-{proposal.narrative_id}"
        if task_id not in self.tasks:
            narrative = self.loop.queue[0]
            sentences = []
            for sent, tags, confs in zip(narrative.active_sentences(),
                                         proposal.predictions, proposal.confidences):
                sentences.append({
                    "tokens": [t.surface for t in sent.tokens],
                    "predicted": [str(t) for t in tags],
                    "confidence": [round(c, 6) for c in confs],
                })
            self.tasks[task_id] = Task(task_id, proposal.narrative_id,
                                       proposal.iteration, proposal.tagger, sentences)
        self.current_task_id = task_id

    def next_task(self) -> Task:
        with self.lock:
            if self._retraining():
                raise HTTPException(status_code=503, detail="ModelNotReady: retrain in progress")
            if self.loop.done:
                raise HTTPException(status_code=404, detail="QueueEmpty")
            self._ensure_current_task()
            task = self.tasks[self.current_task_id]
            if task.status == TaskState.PENDING:
                task.status = TaskState.IN_REVIEW
            return task

    def _validate_tags(self, task: Task, tag_rows: list[list[str]]) -> list[list[Tag]]:
        if len(tag_rows) != len(task.sentences):
            raise HTTPException(status_code=400,
                                detail=f"LengthMismatch: {len(tag_rows)} sentences for "
                                       f"{len(task.sentences)}")
        parsed: list[list[Tag]] = []
        for row, sent in zip(tag_rows, task.sentences):
            if len(row) != len(sent["tokens"]):
                raise HTTPException(status_code=400,
                                    detail=f"LengthMismatch: {len(row)} tags for "
                                           f"{len(sent['tokens'])} tokens")
            try:
                parsed.append([parse_tag(t) for t in row])
            except TagError as exc:
                raise HTTPException(status_code=400, detail=f"UnknownTag: {exc}") from exc
        return parsed

    def submit(self, task_id: str, annotator_id: str, tag_rows: list[list[str]]) -> dict:
        with self.lock:
            task = self.tasks.get(task_id)
            if task is None:
                raise HTTPException(status_code=404, detail="UnknownTask")
            if task.status == TaskState.ACCEPTED:
                raise HTTPException(status_code=409, detail="StaleTask: already accepted")
            if task_id != self.current_task_id and task.supersedes is None:
                raise HTTPException(status_code=409, detail="StaleTask: superseded")
            parsed = self._validate_tags(task, tag_rows)
            changed = 0
            for sent, row in zip(task.sentences, tag_rows):
                changed += sum(1 for p, c in zip(sent["predicted"], row) if p != c)
            record = {
                "record_id": f"rec-{len(self.store.records()) + 1:04d}",
                "task_id": task_id,
                "narrative_id": task.narrative_id,
                "annotator_id": annotator_id,
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                "tags": tag_rows,
                "changed_count": changed,
                "supersedes": task.supersedes,
            }
            if task.supersedes is not None:
                self.loop.replace_corrections(task.narrative_id, parsed)
                # pending predictions for the next narrative are stale now
                self.loop._pending = None
                if self.current_task_id is not None:
                    stale = self.tasks.get(self.current_task_id)
                    if stale is not None and stale.status != TaskState.ACCEPTED:
                        del self.tasks[self.current_task_id]
                    self.current_task_id = None
            else:
                self.loop.accept(parsed)
                self.current_task_id = None
            # persisted only after the state change validated
            self.store.append(record)
            task.status = TaskState.ACCEPTED
            self._accepted_since_retrain += 1
            ticket = self._enqueue_retrain()
            return {"accepted": True, "changed_count": changed,
                    "record_id": record["record_id"], "retrain_ticket": ticket.ticket}

    def reopen(self, task_id: str) -> Task:
        """Re-review: accepted tasks reopen as a superseding task."""
        with self.lock:
            task = self.tasks.get(task_id)
            if task is None:
                raise HTTPException(status_code=404, detail="UnknownTask")
            if task.status != TaskState.ACCEPTED:
                raise HTTPException(status_code=409, detail="TaskNotAccepted")
            record_id = None
            for record in reversed(self.store.records()):
                if record["narrative_id"] == task.narrative_id:
                    record_id = record["record_id"]
                    break
            new_id = f"{task_id}-r{sum(1 for t in self.tasks.values() if t.narrative_id == task.narrative_id)}"
            reopened = Task(new_id, task.narrative_id, task.iteration, task.tagger,
                            [dict(s) for s in task.sentences],
                            status=TaskState.IN_REVIEW, supersedes=record_id or task_id)
            self.tasks[new_id] = reopened
            return reopened

    # -- retraining -------------------------------------------------------------

    def _retraining(self) -> bool:
        return any(t.status in ("queued", "running") for t in self.tickets.values())

    def _enqueue_retrain(self) -> RetrainTicket:
        self._ensure_worker()
        self._ticket_counter += 1
        ticket = RetrainTicket(f"retrain-{self._ticket_counter:04d}")
        self.tickets[ticket.ticket] = ticket
        self._retrain_queue.put(ticket.ticket)
        return ticket

    def trigger_retrain(self) -> RetrainTicket:
        with self.lock:
            if self._accepted_since_retrain == 0:
                raise HTTPException(status_code=409, detail="NothingToRetrain")
            return self._enqueue_retrain()

    def _retrain_worker(self) -> None:
        while True:
            ticket_id = self._retrain_queue.get()
            ticket = self.tickets[ticket_id]
            ticket.status = "running"
            try:
                # Train outside the lock: old models keep serving metrics;
                # the swap happens inside _ensure_current_task under lock.
                if not self.loop.done:
                    self.loop.train_all()
                with self.lock:
                    self.model_version += 1
                    self._accepted_since_retrain = 0
                    ticket.completed_iteration = self.loop.iteration
                    self._ensure_current_task()
                    ticket.status = "done"
            except Exception as exc:  # keep serving the previous model
                ticket.status = "failed"
                ticket.error = f"RetrainFailed: {exc}"
            finally:
                self._retrain_queue.task_done()

    def ticket_status(self, ticket_id: str) -> dict:
        ticket = self.tickets.get(ticket_id)
        if ticket is None:
            raise HTTPException(status_code=404, detail="UnknownTicket")
        out = {"ticket": ticket.ticket, "status": ticket.status}
        if ticket.error:
            out["error"] = ticket.error
        if ticket.status == "done":
            out["model_version"] = self.model_version
            out["accuracy_log"] = self.loop.log
        return out

    # -- views ----------------------------------------------------------------------

    def metrics(self) -> dict:
        with self.lock:
            state = self.loop.state_view()
            state["model_version"] = self.model_version
            state["noisy_pool"] = bool(self.loop.log) and all(
                rec["noisy_pool"] for rec in self.loop.log)
            return state

    def tagset(self) -> list[str]:
        tags = {str(t) for s in self.loop.pool if s.tags for t in s.tags}
        tags.update(ATOMIC_LABELS)
        for n in self.loop.queue:
            for s in n.sentences:
                if s.tags:
                    tags.update(str(t) for t in s.tags)
        return sorted(tags)


# ---------------------------------------------------------------------------
# FastAPI wiring


class SubmitBody(BaseModel):
    annotator_id: str = "anonymous"
    tags: list[list[str]]


def create_app(service: AnnotationService, auth_token: str | None = None) -> FastAPI:
    app = FastAPI(title="glossa annotation service")
    app.state.service = service

    def check_auth(x_glossa_token: str | None = Header(default=None)) -> None:
        if auth_token is not None and x_glossa_token != auth_token:
            raise HTTPException(status_code=401, detail="BadToken")

    auth = Depends(check_auth)

    @app.get("/api/tasks/next", dependencies=[auth])
    def next_task():
        task = service.next_task()
        return {
            "task_id": task.task_id,
            "narrative_id": task.narrative_id,
            "iteration": task.iteration,
            "tagger": task.tagger,
            "status": task.status,
            "sentences": task.sentences,
            "tagset": service.tagset(),
            "model_version": service.model_version,
        }

    @app.post("/api/tasks/{task_id}/submit", dependencies=[auth])
    def submit(task_id: str, body: SubmitBody):
        return service.submit(task_id, body.annotator_id, body.tags)

    @app.post("/api/tasks/{task_id}/reopen", dependencies=[auth])
    def reopen(task_id: str):
        task = service.reopen(task_id)
        return {"task_id": task.task_id, "narrative_id": task.narrative_id,
                "status": task.status, "sentences": task.sentences,
                "supersedes": task.supersedes}

    @app.post("/api/retrain", dependencies=[auth])
    def retrain():
        ticket = service.trigger_retrain()
        return {"ticket": ticket.ticket, "status": ticket.status}

    @app.get("/api/retrain/{ticket_id}", dependencies=[auth])
    def retrain_status(ticket_id: str):
        return service.ticket_status(ticket_id)

    @app.get("/api/metrics", dependencies=[auth])
    def metrics():
        return service.metrics()

    @app.get("/api/tagset", dependencies=[auth])
    def tagset():
        return {"tags": service.tagset()}

    dist_env = os.environ.get("GLOSSA_FRONTEND_DIST")
    candidates = [Path(dist_env)] if dist_env else []
    candidates.append(Path(__file__).resolve().parents[2] / "frontend" / "dist")
    for frontend_dist in candidates:
        if frontend_dist.is_dir():
            from fastapi.staticfiles import StaticFiles
            app.mount("/", StaticFiles(directory=frontend_dist, html=True), name="ui")
            break

    return app


def service_from_config(config: ServiceConfig) -> AnnotationService:
    if config.base_dir is None or config.test_dir is None:
        raise ValueError("config needs base_dir and test_dir")
    base = load_corpus(config.base_dir)
    test = load_corpus(config.test_dir)
    base_pool = [s for n in base for s in n.active_sentences()]
    dictionary = (TagDictionary.load_tsv(config.dictionary_tsv)
                  if config.dictionary_tsv else None)
    mono = None
    if config.mono_dir:
        mono = [s for n in load_corpus(config.mono_dir) for s in n.active_sentences()]
    taggers = [make_tagger(name, crf_max_iters=config.crf_max_iters)
               for name in config.taggers]

    def make_train_data(pool):
        return TrainData(annotated=pool, dictionary=dictionary, mono=mono,
                         seed=config.seed)

    return AnnotationService(base_pool, list(test), taggers, make_train_data,
                             config.data_dir, seed=config.seed)
