"""HTTP inference endpoint for blank filling.

Stateless JSON API over a single immutable checkpoint; a semaphore caps
in-flight generations. Seeds are client-supplied so identical requests
produce identical responses.
"""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .errors import ContextOverflow, MarkerSyntaxError, UnknownSpecialInText
from .infill import InfillRequest, complete
from .model import Checkpoint, DecodeConfig
from .tokenizer import Vocab


@dataclass
class ServeConfig:
    bind_host: str = "127.0.0.1"
    bind_port: int = 8000
    checkpoint_path: str = ""
    vocab_path: str = ""
    max_concurrent: int = 4
    max_new_tokens: int = 128
    max_chars: int = 4000
    default_decode: DecodeConfig = field(default_factory=DecodeConfig)

    def __post_init__(self):
        if self.max_concurrent <= 0 or self.max_new_tokens <= 0 or self.max_chars <= 0:
            raise ValueError("budgets must be positive")


def create_app(serve_config: ServeConfig, checkpoint: Optional[Checkpoint] = None,
               vocab: Optional[Vocab] = None) -> FastAPI:
    state = {"checkpoint": checkpoint, "vocab": vocab}

    @asynccontextmanager
    async def lifespan(_app):
        if state["checkpoint"] is None and serve_config.checkpoint_path:
            state["checkpoint"] = Checkpoint.load(serve_config.checkpoint_path)
        if state["vocab"] is None and serve_config.vocab_path:
            state["vocab"] = Vocab.load(serve_config.vocab_path)
        yield

    app = FastAPI(title="infilling service", lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )
    semaphore = threading.BoundedSemaphore(serve_config.max_concurrent)

    @app.get("/v1/health")
    def health():
        if state["checkpoint"] is None or state["vocab"] is None:
            return JSONResponse({"status": "loading"}, status_code=503)
        return {
            "status": "ok",
            "checkpoint_fingerprint": state["checkpoint"].vocab_fingerprint,
            "vocab_fingerprint": state["vocab"].fingerprint,
        }

    @app.post("/v1/infill")
    async def infill_endpoint(request: Request):
        if state["checkpoint"] is None or state["vocab"] is None:
            return JSONResponse({"error": "model not loaded"}, status_code=503)
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "body must be valid JSON"}, status_code=400)
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            return JSONResponse({"error": 'required string field "text"'}, status_code=400)
        text = body["text"]
        if len(text) > serve_config.max_chars:
            return JSONResponse(
                {"error": f"text exceeds {serve_config.max_chars} characters"},
                status_code=413,
            )
        decode_fields = dict(serve_config.default_decode.__dict__)
        decode_fields["max_new_tokens"] = min(
            decode_fields["max_new_tokens"], serve_config.max_new_tokens
        )
        if "decode" in body:
            if not isinstance(body["decode"], dict):
                return JSONResponse({"error": '"decode" must be an object'}, status_code=400)
            unknown = set(body["decode"]) - set(decode_fields)
            if unknown:
                return JSONResponse(
                    {"error": f"unknown decode keys: {sorted(unknown)}"}, status_code=400
                )
            decode_fields.update(body["decode"])
            decode_fields["max_new_tokens"] = min(
                decode_fields["max_new_tokens"], serve_config.max_new_tokens
            )
        try:
            decode = DecodeConfig(**decode_fields)
        except (TypeError, ValueError) as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        seed = body.get("seed")
        if seed is not None and not isinstance(seed, int):
            return JSONResponse({"error": '"seed" must be an integer'}, status_code=400)

        if not semaphore.acquire(blocking=False):
            return JSONResponse({"error": "at capacity"}, status_code=503)
        try:
            result = complete(
                state["checkpoint"],
                state["vocab"],
                InfillRequest(text_with_blanks=text, decode=decode, seed=seed),
            )
        except (MarkerSyntaxError, UnknownSpecialInText) as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        except ContextOverflow as exc:
            return JSONResponse({"error": str(exc)}, status_code=413)
        finally:
            semaphore.release()
        return {
            "completed_text": result.completed_text,
            "fills": [
                {"index": f.index, "granularity": f.granularity, "text": f.text}
                for f in result.fills
            ],
            "diagnostics": {
                "answers_emitted": result.answers_emitted,
                "truncated": result.truncated,
                "stripped_specials": result.stripped_specials,
            },
        }

    return app
