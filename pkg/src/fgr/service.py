"""HTTP search service.

Read-only over an immutable index; optional trained params supply the
projection and head, otherwise a fresh identity-start head is used so the
token probabilities reduce to sigmoid of raw MaxSim similarities. Per-token
probabilities are always returned alongside spans so clients can re-threshold
locally.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from fgr.backend import KERNEL_BACKEND
from fgr.errors import EmptyInputError, FgrError, ParameterError
from fgr.index import load_index
from fgr.params import init_head, load_params
from fgr.scoring import SearchHit, search

DEFAULT_H2 = 768
PARAMS_ENV = "FGR_PARAMS"


@dataclass
class ServiceConfig:
    index_dir: str
    params_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8080
    default_k: int = 10
    default_threshold: float = 0.5
    max_query_length: int = 512

    def __post_init__(self):
        if not 0 < self.port < 65536:
            raise ParameterError(f"invalid port {self.port}")
        if not 0.0 < self.default_threshold < 1.0:
            raise ParameterError("default threshold must be in (0, 1)")
        if self.default_k < 1:
            raise ParameterError("default k must be >= 1")


class SearchRequest(BaseModel):
    query: str
    k: int | None = None
    threshold: float | None = None


def _hit_payload(hit: SearchHit) -> dict:
    tokens = []
    probs = hit.profile.probs if hit.profile is not None else None
    for i, t in enumerate(hit.record.tok.tokens):
        entry = {"s": t.surface, "b": t.start, "e": t.end}
        if probs is not None:
            entry["p"] = float(probs[i])
        tokens.append(entry)
    spans = [
        {"ts": s.token_start, "te": s.token_end, "cb": s.char_start,
         "ce": s.char_end, "score": s.score}
        for s in (hit.spans or [])
    ]
    return {
        "id": hit.id,
        "score": hit.score,
        "text": hit.record.text,
        "tokens": tokens,
        "spans": spans,
    }


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"code": code, "message": message}})


def create_app(cfg: ServiceConfig) -> FastAPI:
    """Load the index and params once; fail fast on any mismatch."""
    index = load_index(cfg.index_dir)
    params_path = os.environ.get(PARAMS_ENV) or cfg.params_path
    if params_path:
        params = load_params(params_path)
        if params.h != index.h:
            raise ParameterError(
                f"params dim {params.h} does not match index dim {index.h}"
            )
        head, projection = params.head, params.projection
    else:
        head, projection = init_head(index.h, DEFAULT_H2, seed=0), None

    app = FastAPI(title="fgr search service")
    app.state.index = index
    app.state.head = head
    app.state.projection = projection
    app.state.cfg = cfg
    app.state.params_path = params_path

    @app.get("/health")
    def health():
        return {"status": "ok", "passages": index.m, "h": index.h}

    @app.get("/config")
    def config():
        return {
            "index_dir": str(cfg.index_dir),
            "params_path": params_path,
            "default_k": cfg.default_k,
            "default_threshold": cfg.default_threshold,
            "max_query_length": cfg.max_query_length,
            "h": index.h,
            "h2": head.h2,
            "passages": index.m,
            "kernel_backend": KERNEL_BACKEND,
            "trained_params": params_path is not None,
        }

    @app.post("/search")
    def do_search(req: SearchRequest):
        if len(req.query) > cfg.max_query_length:
            return _error(400, "query_too_long",
                          f"query exceeds {cfg.max_query_length} characters")
        k = req.k if req.k is not None else cfg.default_k
        threshold = req.threshold if req.threshold is not None else cfg.default_threshold
        if k < 1:
            return _error(400, "bad_parameter", "k must be >= 1")
        if not 0.0 < threshold < 1.0:
            return _error(400, "bad_parameter", "threshold must be in (0, 1)")
        t0 = time.perf_counter()
        try:
            hits = search(index, req.query, k, head=head, threshold=threshold,
                          projection=projection)
        except EmptyInputError as e:
            return _error(400, "empty_query", str(e))
        except FgrError as e:
            return _error(400, e.code, str(e))
        latency_ms = (time.perf_counter() - t0) * 1000.0
        return {"hits": [_hit_payload(h) for h in hits], "latency_ms": latency_ms}

    return app


def serve(cfg: ServiceConfig) -> None:
    import uvicorn

    app = create_app(cfg)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")
