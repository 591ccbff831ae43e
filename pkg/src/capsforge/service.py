"""HTTP facade for the editor UI: validation, training jobs, symbol catalog.

Jobs run one at a time on a single worker thread with a bounded queue; the
registry is the only shared mutable structure and is guarded by one lock.
Training is the same code path the CLI uses, so a job's loss history is
bit-identical to a CLI run with the same seed and config. Restarting the
process loses in-flight jobs (the registry is in memory by design).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import queue
import threading
import time
from dataclasses import dataclass, field

from fastapi import FastAPI, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import backprop as bp
from . import capsule as cm
from . import model_io as mio
from . import symbols as sym
from .errors import (CapsForgeError, DocumentSyntaxError, ShapeErrors,
                     UnknownSymbolKind, UnresolvedReference)
from .graph import classify_layering

MAX_BODY_BYTES = 8 * 1024 * 1024
MAX_INLINE_DATASET_BYTES = 1 * 1024 * 1024
JOB_QUEUE_SIZE = 16


def json_safe(value: float) -> float | None:
    """Strict JSON has no Infinity/NaN; diverged losses become null."""
    return value if math.isfinite(value) else None


@dataclass
class JobRecord:
    id: str
    document_hash: str
    state: str = "pending"          # pending -> running -> finished | failed
    loss: list = field(default_factory=list)   # [(iteration, loss)] append-only
    created: float = 0.0
    updated: float = 0.0
    error: str | None = None
    metrics: dict | None = None
    checkpoint: bytes | None = None

    def to_json(self) -> dict:
        out = {"id": self.id, "document_hash": self.document_hash,
               "state": self.state, "created": self.created,
               "updated": self.updated, "loss_rows": len(self.loss)}
        if self.loss:
            out["final_loss"] = json_safe(self.loss[-1][1])
        if self.error is not None:
            out["error"] = self.error
        if self.metrics is not None:
            out["metrics"] = self.metrics
        if self.state == "finished":
            out["checkpoint_url"] = f"/api/jobs/{self.id}/checkpoint"
        return out


@dataclass(frozen=True)
class _JobInput:
    document_text: str
    config: bp.TrainConfig
    pairs: list
    init_params: object  # Parameters | None


class JobRegistry:
    """Single synchronized mutable structure of the service.

    With a state directory, settled jobs (finished or failed) are written to
    disk and reloaded on startup, so a restart loses only in-flight jobs.
    """

    def __init__(self, state_dir: str | None = None):
        self._lock = threading.Lock()
        self._records: dict[str, JobRecord] = {}
        self._state_dir = state_dir
        if state_dir is not None:
            self._load_settled(state_dir)
        self._queue: queue.Queue = queue.Queue(maxsize=JOB_QUEUE_SIZE)
        self._worker = threading.Thread(target=self._run, daemon=True)
        self._worker.start()

    def _load_settled(self, state_dir: str) -> None:
        os.makedirs(state_dir, exist_ok=True)
        for name in sorted(os.listdir(state_dir)):
            if not name.endswith(".json"):
                continue
            try:
                with open(os.path.join(state_dir, name), encoding="utf-8") as fh:
                    raw = json.load(fh)
                record = JobRecord(
                    id=raw["id"], document_hash=raw["document_hash"],
                    state=raw["state"],
                    loss=[tuple(row) for row in raw["loss"]],
                    created=raw["created"], updated=raw["updated"],
                    error=raw.get("error"), metrics=raw.get("metrics"))
                ckpt_path = os.path.join(state_dir, raw["id"] + ".ckpt")
                if os.path.exists(ckpt_path):
                    with open(ckpt_path, "rb") as fh:
                        record.checkpoint = fh.read()
                self._records[record.id] = record
            except (OSError, KeyError, ValueError, json.JSONDecodeError):
                continue  # unreadable entries are skipped, not fatal

    def _persist(self, record: JobRecord) -> None:
        if self._state_dir is None:
            return
        payload = {"id": record.id, "document_hash": record.document_hash,
                   "state": record.state, "loss": [list(r) for r in record.loss],
                   "created": record.created, "updated": record.updated,
                   "error": record.error, "metrics": record.metrics}
        path = os.path.join(self._state_dir, record.id + ".json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
        if record.checkpoint is not None:
            with open(os.path.join(self._state_dir, record.id + ".ckpt"),
                      "wb") as fh:
                fh.write(record.checkpoint)

    def get(self, job_id: str) -> JobRecord | None:
        with self._lock:
            return self._records.get(job_id)

    def loss_rows(self, job_id: str, start: int) -> list | None:
        with self._lock:
            record = self._records.get(job_id)
            if record is None:
                return None
            return [[it, json_safe(lo)] for it, lo in record.loss[start:]]

    def submit(self, job_id: str, job: _JobInput) -> tuple[JobRecord, bool]:
        """Returns (record, created). Identical in-flight submissions conflict."""
        with self._lock:
            existing = self._records.get(job_id)
            if existing is not None:
                if existing.state in ("pending", "running"):
                    raise KeyError(job_id)  # mapped to 409 by the handler
                return existing, False
            now = time.time()
            record = JobRecord(id=job_id,
                               document_hash=mio.document_hash(job.document_text),
                               created=now, updated=now)
            self._records[job_id] = record
        self._queue.put((record, job))
        return record, True

    def _run(self):
        while True:
            record, job = self._queue.get()
            self._execute(record, job)
            self._queue.task_done()

    def _execute(self, record: JobRecord, job: _JobInput):
        with self._lock:
            record.state = "running"
            record.updated = time.time()
        try:
            net = mio.parse_graph_document(job.document_text)

            def on_iteration(it, lo):
                if it % job.config.log_stride == 0 or it == job.config.max_iter:
                    with self._lock:
                        record.loss.append((it, lo))
                        record.updated = time.time()

            params, history = bp.train(net, job.pairs, job.config,
                                       init_params=job.init_params,
                                       on_iteration=on_iteration)
            metrics = bp.evaluate(net, job.pairs, params,
                                  loss_fn=job.config.loss)
            metrics = {k: (json_safe(v) if isinstance(v, float) else v)
                       for k, v in metrics.items()}
            ckpt = mio.checkpoint_from_training(
                job.document_text, params, job.config.max_iter, history)
            with self._lock:
                record.metrics = metrics
                record.checkpoint = mio.checkpoint_to_bytes(ckpt)
                record.state = "finished"
                record.updated = time.time()
                self._persist(record)
        except Exception as e:  # failure is a terminal job state, not a crash
            with self._lock:
                record.state = "failed"
                record.error = f"{type(e).__name__}: {e}"
                record.updated = time.time()
                self._persist(record)


def _validation_payload(text: str) -> tuple[dict, int]:
    """(body, status) for a validate request holding raw document text."""
    try:
        doc = mio.parse_document(text)
    except (DocumentSyntaxError, UnknownSymbolKind, UnresolvedReference) as e:
        return {"detail": str(e)}, 400
    try:
        net = mio.document_to_network(doc)
    except ShapeErrors as e:
        return {"valid": False, "errors": [i.to_json() for i in e.issues]}, 200
    except CapsForgeError as e:
        return {"valid": False,
                "errors": [{"code": type(e).__name__, "message": str(e)}]}, 200
    report = cm.validate_shapes(net)
    layering = classify_layering(net.dag)
    return {"valid": True,
            "shapes": {vid: list(s) for vid, s in report.shapes.items()},
            "classification": "layered" if layering is not None else "skip"}, 200


def create_app(state_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="capsforge service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    registry = JobRegistry(state_dir)
    catalog_bytes = mio.canonical_json(sym.catalog()).encode("utf-8")

    @app.middleware("http")
    async def body_size_guard(request: Request, call_next):
        length = request.headers.get("content-length")
        if length and int(length) > MAX_BODY_BYTES:
            return JSONResponse({"detail": "body too large"}, status_code=413)
        return await call_next(request)

    @app.get("/api/symbols")
    def get_symbols() -> Response:
        return Response(content=catalog_bytes, media_type="application/json")

    @app.post("/api/validate")
    async def post_validate(request: Request) -> Response:
        body = await request.body()
        try:
            text = body.decode("utf-8")
            json.loads(text)
        except (UnicodeDecodeError, json.JSONDecodeError):
            return JSONResponse({"detail": "body is not JSON"}, status_code=400)
        payload, status = _validation_payload(text)
        return JSONResponse(payload, status_code=status)

    @app.post("/api/jobs")
    async def post_job(request: Request) -> Response:
        body = await request.body()
        try:
            raw = json.loads(body)
        except json.JSONDecodeError:
            return JSONResponse({"detail": "body is not JSON"}, status_code=400)
        if not isinstance(raw, dict) or "document" not in raw:
            return JSONResponse({"detail": "missing document"}, status_code=400)

        document_text = mio.canonical_json(raw["document"]) \
            if not isinstance(raw["document"], str) else raw["document"]
        try:
            doc = mio.parse_document(document_text)
            document_text = mio.serialize(doc)  # canonical form binds the hash
            net = mio.document_to_network(doc)
        except CapsForgeError as e:
            return JSONResponse({"detail": f"document: {e}"}, status_code=422)

        config_raw = raw.get("config", {})
        try:
            config = bp.TrainConfig(
                learning_rate=float(config_raw.get("learning_rate", 0.0)),
                max_iter=int(config_raw.get("max_iter", 0)),
                loss=config_raw.get("loss", "sse"),
                seed=int(config_raw.get("seed", 0)),
                log_stride=int(config_raw.get("log_stride", 1)))
        except (ValueError, TypeError) as e:
            return JSONResponse({"detail": f"config: {e}"}, status_code=422)

        dataset_raw = raw.get("dataset", {})
        try:
            pairs, dataset_token = _load_job_dataset(dataset_raw, net)
        except ValueError as e:
            return JSONResponse({"detail": str(e)}, status_code=422)
        except OverflowError as e:
            return JSONResponse({"detail": str(e)}, status_code=413)

        has_payloads = (any(c.bias is not None for c in doc.capsules)
                        or any(c.weight is not None for c in doc.connections))
        init = net.parameters() if has_payloads else None

        fingerprint = hashlib.sha256()
        fingerprint.update(document_text.encode("utf-8"))
        fingerprint.update(mio.canonical_json({
            "learning_rate": config.learning_rate, "loss": config.loss,
            "log_stride": config.log_stride, "max_iter": config.max_iter,
            "seed": config.seed}).encode("utf-8"))
        fingerprint.update(dataset_token)
        job_id = fingerprint.hexdigest()[:16]

        job = _JobInput(document_text, config, pairs, init)
        try:
            record, created = registry.submit(job_id, job)
        except KeyError:
            return JSONResponse(
                {"detail": f"job {job_id} is already in flight"},
                status_code=409)
        except queue.Full:
            return JSONResponse({"detail": "job queue is full"}, status_code=503)
        return JSONResponse({"id": record.id, "url": f"/api/jobs/{record.id}"},
                            status_code=201 if created else 200)

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str) -> Response:
        record = registry.get(job_id)
        if record is None:
            return JSONResponse({"detail": "unknown job"}, status_code=404)
        return JSONResponse(record.to_json())

    @app.get("/api/jobs/{job_id}/loss")
    def get_job_loss(job_id: str,
                     start: int = Query(0, alias="from")) -> Response:
        rows = registry.loss_rows(job_id, max(start, 0))
        if rows is None:
            return JSONResponse({"detail": "unknown job"}, status_code=404)
        return JSONResponse({"from": max(start, 0), "rows": rows})

    @app.get("/api/jobs/{job_id}/checkpoint")
    def get_job_checkpoint(job_id: str) -> Response:
        record = registry.get(job_id)
        if record is None:
            return JSONResponse({"detail": "unknown job"}, status_code=404)
        if record.state != "finished" or record.checkpoint is None:
            return JSONResponse({"detail": "job has no checkpoint"},
                                status_code=409)
        return Response(content=record.checkpoint,
                        media_type="application/octet-stream")

    return app


def _load_job_dataset(dataset_raw, net: cm.CapsuleNetwork):
    """Pairs plus a stable byte token identifying the dataset content."""
    if not isinstance(dataset_raw, dict):
        raise ValueError("dataset must be an object")
    parts = net.parts
    if len(net.input_shapes) != 1 or len(parts.outputs) != 1:
        raise ValueError("jobs need a single-input single-output network")
    report = cm.validate_shapes(net)
    feature_shape = tuple(net.input_shapes[parts.inputs[0]])
    target_shape = tuple(report.shapes[parts.outputs[0]])
    if "inline_csv" in dataset_raw:
        text = dataset_raw["inline_csv"]
        if not isinstance(text, str):
            raise ValueError("inline_csv must be a string")
        if len(text.encode("utf-8")) > MAX_INLINE_DATASET_BYTES:
            raise OverflowError("inline dataset exceeds 1 MiB; use a server path")
        spec = mio.DatasetSpec("csv", feature_shape, target_shape,
                               dtype=net.dtype)
        try:
            pairs = mio.load_csv_text(text, spec)
        except CapsForgeError as e:
            raise ValueError(f"dataset: {e}")
        if not pairs:
            raise ValueError("inline dataset is empty")
        return pairs, text.encode("utf-8")
    if "path" in dataset_raw:
        fmt = dataset_raw.get("format", "csv")
        if fmt not in ("csv", "idx"):
            raise ValueError(f"unknown dataset format {fmt!r}")
        spec = mio.DatasetSpec(fmt, feature_shape, target_shape,
                               labels_path=dataset_raw.get("labels"),
                               dtype=net.dtype)
        try:
            pairs = mio.load_dataset(dataset_raw["path"], spec)
        except (OSError, CapsForgeError) as e:
            raise ValueError(f"dataset: {e}")
        if not pairs:
            raise ValueError("dataset is empty")
        token = f"path:{dataset_raw['path']}:{dataset_raw.get('labels')}"
        return pairs, token.encode("utf-8")
    raise ValueError("dataset needs inline_csv or path")
