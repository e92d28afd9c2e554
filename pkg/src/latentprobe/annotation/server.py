"""HTTP wiring for the annotation service (FastAPI).

Every JSON payload carries ``schema_version``.  Auth is a per-annotator
bearer token in the ``X-Annotation-Token`` header.  Image bytes are
served raw by opaque id; no generation metadata appears in any payload.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse, Response

from latentprobe.annotation.service import (
    PAYLOAD_SCHEMA_VERSION,
    AnnotationStudy,
    AuthError,
    ConflictError,
    NotFoundError,
    VerdictStore,
)
from latentprobe.errors import InvalidArgument
from latentprobe.records import read_records
from latentprobe.store import ImageStore


def create_app(store: VerdictStore, images: ImageStore) -> FastAPI:
    app = FastAPI(title="annotation service", docs_url=None, redoc_url=None)
    study = store.study

    @app.exception_handler(AuthError)
    async def _auth(_req: Request, exc: AuthError):
        return JSONResponse(status_code=401, content={"error": str(exc)})

    @app.exception_handler(NotFoundError)
    async def _notfound(_req: Request, exc: NotFoundError):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(ConflictError)
    async def _conflict(_req: Request, exc: ConflictError):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(InvalidArgument)
    async def _invalid(_req: Request, exc: InvalidArgument):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/api/task")
    def get_task(
        annotator: str = Query(...),
        mode: str = Query("labeling"),
        x_annotation_token: str = Header(default=""),
    ):
        study.authenticate(annotator, x_annotation_token)
        if mode == "consensus":
            task = store.next_consensus_task(annotator)
        elif mode == "labeling":
            task = store.next_task(annotator)
        else:
            raise InvalidArgument(f"unknown task mode {mode!r}")
        if task is None:
            return {"schema_version": PAYLOAD_SCHEMA_VERSION, "done": True}
        return task.to_payload()

    @app.get("/api/image/{image_id}")
    def get_image(image_id: str, x_annotation_token: str = Header(default="")):
        if x_annotation_token not in study.annotators.values():
            raise AuthError("bad token")
        if image_id not in study.tasks:
            raise NotFoundError(f"unknown image: {image_id!r}")
        try:
            data = images.load_bytes(image_id)
        except KeyError as exc:
            raise NotFoundError(f"image bytes missing: {image_id!r}") from exc
        return Response(content=data, media_type="image/png")

    @app.post("/api/verdict")
    async def post_verdict(request: Request,
                           x_annotation_token: str = Header(default="")):
        body = await request.json()
        for field_name in ("image_id", "annotator_id", "answer"):
            if field_name not in body:
                raise InvalidArgument(f"missing field {field_name!r}")
        study.authenticate(body["annotator_id"], x_annotation_token)
        answer = body["answer"]
        if answer not in ("yes", "no"):
            raise InvalidArgument("answer must be 'yes' or 'no'")
        verdict = store.submit(
            image_id=body["image_id"],
            annotator_id=body["annotator_id"],
            answer=answer == "yes",
            is_consensus=bool(body.get("is_consensus", False)),
        )
        return {"schema_version": PAYLOAD_SCHEMA_VERSION, "accepted": True,
                "verdict": verdict.to_dict()}

    @app.get("/api/export")
    def get_export():
        return store.export()

    @app.get("/api/progress")
    def get_progress():
        return store.progress()

    return app


def build_study_from_files(records_path: str | Path, images_dir: str | Path,
                           annotators_path: str | Path, shuffle_seed: int = 0,
                           include_source: bool = False,
                           ) -> tuple[AnnotationStudy, ImageStore]:
    """Assemble a study from campaign artifacts on disk.

    ``annotators_path`` holds ``{"annotators": {id: token, id: token}}``.
    """
    records = read_records(records_path)
    raw = json.loads(Path(annotators_path).read_text())
    annotators = raw["annotators"] if "annotators" in raw else raw
    study = AnnotationStudy.from_records(
        records, annotators, shuffle_seed=shuffle_seed,
        include_source=include_source)
    return study, ImageStore(images_dir)
