"""HTTP inference service (v1).

Endpoints:
  POST /v1/images                  multipart upload -> {"id": ...}
  GET  /v1/references?image=&top=  ranked reference candidates
  POST /v1/repairs                 {"image": id, "reference": id|null,
                                    "auto": bool, "ref_rank": int,
                                    "restore_only": bool,
                                    "colorize_only": bool} -> {"id": job id}
  GET  /v1/repairs/{id}            {"state": ..., "result": url|null, ...}
  GET  /v1/results/{id}            repaired PNG
  GET  /v1/thumbnails/{name}       corpus thumbnail PNG

Repairs run on a bounded worker pool; clients poll the job endpoint.
Errors are JSON {"code", "message"} with matching HTTP status.
"""

from __future__ import annotations

import io
import json
import logging
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, UploadFile
from fastapi.responses import FileResponse, JSONResponse
from PIL import Image

from .colorspace import rgb_to_gray
from .model import RepairModel
from .pipeline import RepairPipeline, RepairRequest
from .refselect import CorpusIndex, ReferenceSelector

log = logging.getLogger(__name__)

MAX_UPLOAD_BYTES = 25 * 1024 * 1024
RESULT_TTL_SECONDS = 24 * 3600
THUMB_SIZE = 96


@dataclass
class Job:
    id: str
    state: str = "queued"   # queued -> running -> done | failed
    params: dict = field(default_factory=dict)
    result_path: Path | None = None
    error: str | None = None
    created: float = field(default_factory=time.monotonic)


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"code": code, "message": message}, status_code=status)


class RepairService:
    def __init__(self, model: RepairModel, store_dir: str | Path,
                 corpus_dir: str | Path | None = None, workers: int = 2):
        self.store = Path(store_dir)
        (self.store / "uploads").mkdir(parents=True, exist_ok=True)
        (self.store / "results").mkdir(parents=True, exist_ok=True)
        index = None
        if corpus_dir is not None:
            index = CorpusIndex(
                ReferenceSelector(pretrained=model.cfg.pretrained_backbones),
                corpus_dir)
            index.build()
        self.pipeline = RepairPipeline(model, corpus_index=index)
        self.jobs: dict[str, Job] = {}
        self.lock = threading.Lock()
        self.pool = ThreadPoolExecutor(max_workers=workers)
        self._load_jobs()
        self._cleanup_expired()

    # job store survives restarts via a JSON sidecar per job
    def _job_path(self, job_id: str) -> Path:
        return self.store / "results" / f"{job_id}.json"

    def _persist(self, job: Job):
        self._job_path(job.id).write_text(json.dumps({
            "id": job.id, "state": job.state, "params": job.params,
            "result": str(job.result_path) if job.result_path else None,
            "error": job.error}))

    def _load_jobs(self):
        for path in (self.store / "results").glob("*.json"):
            d = json.loads(path.read_text())
            job = Job(id=d["id"], state=d["state"], params=d["params"],
                      error=d.get("error"))
            if d.get("result"):
                job.result_path = Path(d["result"])
            if job.state in ("queued", "running"):
                job.state = "failed"
                job.error = "interrupted by service restart"
            self.jobs[job.id] = job

    def _cleanup_expired(self):
        cutoff = time.time() - RESULT_TTL_SECONDS
        for path in (self.store / "results").iterdir():
            if path.stat().st_mtime < cutoff:
                path.unlink(missing_ok=True)

    def upload(self, data: bytes) -> str:
        image_id = uuid.uuid4().hex
        try:
            Image.open(io.BytesIO(data)).verify()
        except Exception as exc:
            raise ValueError(f"not a decodable image: {exc}") from exc
        (self.store / "uploads" / f"{image_id}.png").write_bytes(data)
        return image_id

    def _upload_array(self, image_id: str) -> np.ndarray:
        path = self.store / "uploads" / f"{image_id}.png"
        if not path.exists():
            raise KeyError(image_id)
        return np.asarray(Image.open(path).convert("RGB"),
                          dtype=np.float64) / 255.0

    def references(self, image_id: str, top: int) -> list[dict]:
        if self.pipeline.corpus_index is None:
            raise RuntimeError("no reference corpus loaded")
        gray = rgb_to_gray(self._upload_array(image_id))
        ranked = self.pipeline.corpus_index.rank(gray, k=top)
        out = []
        for r in ranked:
            out.append({"id": r.corpus_id, "score": r.score, "rank": r.rank,
                        "thumbnail": f"/v1/thumbnails/{r.corpus_id}"})
        return out

    def thumbnail_png(self, name: str) -> bytes:
        directory = self.pipeline.corpus_index.directory
        path = directory / name
        if not path.exists():
            raise KeyError(name)
        img = Image.open(path).convert("RGB")
        img.thumbnail((THUMB_SIZE, THUMB_SIZE))
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return buf.getvalue()

    def submit(self, params: dict) -> Job:
        self._upload_array(params["image"])  # raises KeyError on unknown id
        job = Job(id=uuid.uuid4().hex, params=params)
        with self.lock:
            self.jobs[job.id] = job
        self._persist(job)
        self.pool.submit(self._run, job)
        return job

    def _run(self, job: Job):
        with self.lock:
            job.state = "running"
        self._persist(job)
        try:
            image = self._upload_array(job.params["image"])
            reference = None
            if job.params.get("reference"):
                ref_id = job.params["reference"]
                upload = self.store / "uploads" / f"{ref_id}.png"
                if upload.exists():
                    reference = self._upload_array(ref_id)
                else:
                    from .data import load_image

                    reference = load_image(
                        self.pipeline.corpus_index.directory / ref_id)
            req = RepairRequest(
                image=image, reference=reference,
                auto_rank=job.params.get("ref_rank", 1),
                restore_only=job.params.get("restore_only", False),
                colorize_only=job.params.get("colorize_only", False))
            result = self.pipeline.repair(req)
            out = result.rgb if result.rgb is not None else result.gray
            path = self.store / "results" / f"{job.id}.png"
            tmp = path.with_suffix(".png.tmp")
            Image.fromarray(
                (np.clip(out, 0, 1) * 255).round().astype(np.uint8)).save(
                tmp, format="PNG")
            tmp.replace(path)
            with self.lock:
                job.result_path = path
                job.state = "done"
        except Exception as exc:
            log.exception("repair job %s failed", job.id)
            with self.lock:
                job.state = "failed"
                job.error = str(exc)
        self._persist(job)


def create_app(service: RepairService | None = None) -> FastAPI:
    app = FastAPI(title="photorevive", version="1")
    app.state.service = service

    def svc() -> RepairService | None:
        return app.state.service

    @app.post("/v1/images")
    async def upload_image(file: UploadFile, request: Request):
        s = svc()
        if s is None:
            return _error(503, "model_not_loaded", "service starting up")
        data = await file.read()
        if len(data) > MAX_UPLOAD_BYTES:
            return _error(413, "too_large", "upload exceeds 25 MB")
        try:
            image_id = s.upload(data)
        except ValueError as exc:
            return _error(400, "bad_image", str(exc))
        return {"id": image_id}

    @app.get("/v1/references")
    def references(image: str = "", top: int = 5):
        s = svc()
        if s is None:
            return _error(503, "model_not_loaded", "service starting up")
        if not image:
            return _error(400, "missing_param", "image query parameter required")
        try:
            return {"references": s.references(image, top)}
        except KeyError:
            return _error(404, "unknown_image", f"no upload {image}")
        except Exception as exc:
            return _error(400, "bad_request", str(exc))

    @app.post("/v1/repairs")
    async def create_repair(request: Request):
        s = svc()
        if s is None:
            return _error(503, "model_not_loaded", "service starting up")
        try:
            params = await request.json()
        except Exception:
            return _error(400, "bad_json", "request body must be JSON")
        if not isinstance(params, dict) or "image" not in params:
            return _error(400, "missing_param", "body needs an image id")
        try:
            job = s.submit(params)
        except KeyError:
            return _error(404, "unknown_image", f"no upload {params['image']}")
        return {"id": job.id, "state": job.state}

    @app.get("/v1/repairs/{job_id}")
    def repair_status(job_id: str):
        s = svc()
        if s is None:
            return _error(503, "model_not_loaded", "service starting up")
        job = s.jobs.get(job_id)
        if job is None:
            return _error(404, "unknown_job", f"no job {job_id}")
        return {"id": job.id, "state": job.state,
                "result": f"/v1/results/{job.id}" if job.state == "done" else None,
                "error": job.error}

    @app.get("/v1/results/{job_id}")
    def result_png(job_id: str):
        s = svc()
        if s is None:
            return _error(503, "model_not_loaded", "service starting up")
        job = s.jobs.get(job_id)
        if job is None or job.result_path is None or not job.result_path.exists():
            return _error(404, "unknown_result", f"no result for {job_id}")
        return FileResponse(job.result_path, media_type="image/png")

    @app.get("/v1/thumbnails/{name}")
    def thumbnail(name: str):
        s = svc()
        if s is None:
            return _error(503, "model_not_loaded", "service starting up")
        try:
            data = s.thumbnail_png(name)
        except KeyError:
            return _error(404, "unknown_thumbnail", name)
        from fastapi.responses import Response

        return Response(content=data, media_type="image/png")

    return app


def main():  # pragma: no cover - manual entry point
    import argparse

    import uvicorn

    from .model import model_from_checkpoint

    parser = argparse.ArgumentParser()
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--corpus", default=None)
    parser.add_argument("--store", default="service_store")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args()
    service = RepairService(model_from_checkpoint(args.checkpoint),
                            args.store, args.corpus)
    uvicorn.run(create_app(service), host=args.host, port=args.port)


if __name__ == "__main__":  # pragma: no cover
    main()
