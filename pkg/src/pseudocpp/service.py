"""Local HTTP facade over a trained checkpoint.

POST /api/generate turns pseudocode into postprocessed C++ through the loaded
model; POST /api/evaluate scores a candidate/reference pair; GET /api/health
reports liveness and whether a checkpoint is loaded. The checkpoint is
immutable after startup, so concurrent requests share it freely.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .checkpoint import Checkpoint, load_checkpoint
from .metrics import MetricWeights, score_pair
from .pipeline import generate_code
from .tokenizer import encode


@dataclass
class ServiceState:
    checkpoint: Checkpoint | None = None
    weights: MetricWeights = field(default_factory=MetricWeights)
    started_at: float = field(default_factory=time.time)


class GenerateRequest(BaseModel):
    pseudocode: str
    max_len: int | None = None


class EvaluateRequest(BaseModel):
    candidate: str
    reference: str


def create_app(
    checkpoint_path: str | Path | None = None,
    state: ServiceState | None = None,
) -> FastAPI:
    if state is None:
        state = ServiceState()
    if checkpoint_path is not None:
        state.checkpoint = load_checkpoint(checkpoint_path)

    app = FastAPI(title="pseudocpp service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.service = state

    @app.get("/api/health")
    def health() -> dict:
        ckpt = state.checkpoint
        return {
            "status": "ok",
            "model_loaded": ckpt is not None,
            "checkpoint_id": ckpt.checkpoint_id if ckpt is not None else None,
        }

    @app.post("/api/generate")
    def generate(request: GenerateRequest) -> dict:
        ckpt = state.checkpoint
        if ckpt is None:
            raise HTTPException(status_code=503, detail="no model loaded")
        if not request.pseudocode.strip():
            raise HTTPException(status_code=422, detail="pseudocode must be non-empty")
        source = encode(ckpt.src_vocab, request.pseudocode)
        if len(source.ids) > ckpt.config.max_positions:
            raise HTTPException(
                status_code=413,
                detail=f"input needs {len(source.ids)} positions, "
                f"model allows {ckpt.config.max_positions}",
            )
        max_len = request.max_len or min(512, ckpt.config.max_positions - 1)
        started = time.perf_counter()
        code = generate_code(
            ckpt.params, ckpt.config, ckpt.src_vocab, ckpt.tgt_vocab, request.pseudocode, max_len
        )
        latency_ms = (time.perf_counter() - started) * 1000.0
        return {"code": code, "tokens": len(code.split()), "latency_ms": latency_ms}

    @app.post("/api/evaluate")
    def evaluate(request: EvaluateRequest) -> dict:
        scores = score_pair(request.candidate, request.reference, state.weights)
        return scores.to_dict()

    return app
