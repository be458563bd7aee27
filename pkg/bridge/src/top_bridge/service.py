"""FastAPI service speaking the mask-fill / parse oracle protocol.

Endpoints (JSON, UTF-8):
    POST /v1/fill_mask  {"tokens": [...], "mask_positions": [...], "top_k": 1}
    POST /v1/parse      {"utterance": "..."}
    GET  /v1/health

Malformed requests get 400, an out-of-range mask position gets 422, and
everything returns 503 until the models are loaded.
"""

from __future__ import annotations

import logging
import threading
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field, StrictInt, StrictStr

from .config import BridgeConfig
from .inference import MASK_SENTINEL, MaskFiller, Seq2SeqParser, UndeclaredMask

log = logging.getLogger("top_bridge")


class FillMaskRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    tokens: list[StrictStr] = Field(min_length=1)
    mask_positions: list[StrictInt] = Field(min_length=1)
    top_k: StrictInt | None = Field(default=None, ge=1)


class ParseRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    utterance: StrictStr = Field(min_length=1)


def create_app(config: BridgeConfig) -> FastAPI:
    state: dict = {"ready": False, "filler": None, "parser": None}
    gate = threading.BoundedSemaphore(config.max_concurrent)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        log.info("loading masked-LM %r on %s", config.mlm, config.device)
        state["filler"] = MaskFiller(config.mlm, device=config.device)
        if config.parser is not None:
            log.info("loading parser %r on %s", config.parser, config.device)
            state["parser"] = Seq2SeqParser(config.parser, device=config.device)
        state["ready"] = True
        log.info("models loaded, serving")
        yield

    app = FastAPI(title="top-bridge", lifespan=lifespan)

    @app.exception_handler(RequestValidationError)
    async def malformed_request(request, exc):
        return JSONResponse(
            status_code=400,
            content={"error": "malformed request", "detail": str(exc)},
        )

    def require_ready() -> None:
        if not state["ready"]:
            raise HTTPException(status_code=503, detail="models not loaded")

    @app.get("/v1/health")
    def health():
        if not state["ready"]:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {
            "status": "ok",
            "proposer": state["filler"].model_id,
            "parser": state["parser"].model_id if state["parser"] else None,
        }

    @app.post("/v1/fill_mask")
    def fill_mask(request: FillMaskRequest):
        require_ready()
        positions = request.mask_positions
        if positions != sorted(set(positions)):
            raise HTTPException(
                status_code=400, detail="mask_positions must be strictly increasing"
            )
        out_of_range = [p for p in positions if not 0 <= p < len(request.tokens)]
        if out_of_range:
            raise HTTPException(
                status_code=422, detail=f"mask position(s) out of range: {out_of_range}"
            )
        not_masked = [p for p in positions if request.tokens[p] != MASK_SENTINEL]
        if not_masked:
            raise HTTPException(
                status_code=400,
                detail=f"token at position(s) {not_masked} is not {MASK_SENTINEL}",
            )
        if any(not t or t != t.strip() or " " in t for t in request.tokens):
            raise HTTPException(
                status_code=400, detail="tokens must be non-empty and whitespace-free"
            )
        top_k = request.top_k if request.top_k is not None else config.top_k
        try:
            with gate:
                proposals = state["filler"].propose(request.tokens, positions, top_k)
        except UndeclaredMask as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        body = []
        for proposal in proposals:
            if proposal["token"] is None:
                body.append({"position": proposal["position"], "token": None})
            else:
                body.append(proposal)
        return {"proposals": body}

    @app.post("/v1/parse")
    def parse(request: ParseRequest):
        require_ready()
        if state["parser"] is None:
            raise HTTPException(status_code=503, detail="no parser model configured")
        with gate:
            answer = state["parser"].parse(request.utterance)
        return {"parse": answer}

    return app
