"""FastAPI wiring: the attention endpoint plus a readiness probe."""

from __future__ import annotations

from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .service import ShimRequestError, ShimService


class AttentionQuery(BaseModel):
    text: str
    task: str = ""
    layer: int


def create_app(service: ShimService | None = None, loader=None) -> FastAPI:
    """Build the app; ``loader`` defers checkpoint loading to startup.

    Requests arriving before the loader has run are answered 503, which is
    what a supervisor's readiness probe should see while weights stream in.
    """

    @asynccontextmanager
    async def lifespan(app_: FastAPI):
        if app_.state.service is None and loader is not None:
            app_.state.service = loader()
        yield

    app = FastAPI(title="attention shim", lifespan=lifespan)
    app.state.service = service

    def ready() -> ShimService:
        if app.state.service is None:
            raise HTTPException(status_code=503, detail="model is loading")
        return app.state.service

    @app.get("/healthz")
    def healthz():
        if app.state.service is None:
            return JSONResponse({"status": "loading"}, status_code=503)
        svc = app.state.service
        return {"status": "ok", "model": svc.name, "layers": svc.num_layers}

    @app.post("/v1/attention")
    def attention(query: AttentionQuery):
        svc = ready()
        try:
            return svc.extract(query.text, query.task, query.layer)
        except ShimRequestError as exc:
            raise HTTPException(status_code=exc.status, detail=str(exc)) from exc

    return app
