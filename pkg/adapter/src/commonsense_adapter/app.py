"""FastAPI application speaking the inference wire protocol.

POST ``/`` with ``{"op": "generate"|"word_prob", "event": ..,
"dimension": .., "word": ..}`` answers ``{"generated_text": ..}`` or
``{"prob": ..}``; malformed requests answer ``{"error": "bad_request",
"detail": ..}`` with status 400.  GET ``/health`` reports the model
identity; every response carries it in the ``X-Model-Identity`` header.
The server holds no per-request state and no cache (callers own caching).
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .scorer import RELATIONS, GreedyScorer, ScorerStats


def _bad_request(detail: str, identity: str) -> JSONResponse:
    return JSONResponse(
        status_code=400,
        content={"error": "bad_request", "detail": detail},
        headers={"X-Model-Identity": identity},
    )


def create_app(scorer: GreedyScorer) -> FastAPI:
    app = FastAPI(title="commonsense-adapter")
    stats = ScorerStats()
    app.state.scorer = scorer
    app.state.stats = stats

    @app.get("/health")
    def health():
        return JSONResponse(
            content={"status": "ok", "model": scorer.identity},
            headers={"X-Model-Identity": scorer.identity},
        )

    @app.post("/")
    async def infer(request: Request):
        try:
            payload = await request.json()
        except Exception:
            return _bad_request("body is not valid JSON", scorer.identity)
        if not isinstance(payload, dict):
            return _bad_request("body must be a JSON object", scorer.identity)

        op = payload.get("op")
        if op not in ("generate", "word_prob"):
            return _bad_request(f"unknown op {op!r}", scorer.identity)
        event = payload.get("event")
        if not isinstance(event, str) or not event.strip():
            return _bad_request("'event' must be a non-empty string", scorer.identity)
        dimension = payload.get("dimension")
        if dimension not in RELATIONS:
            return _bad_request(
                f"'dimension' must be one of {', '.join(RELATIONS)}", scorer.identity
            )

        stats.bump(op)
        if op == "generate":
            text = scorer.generate(event, dimension)
            body = {"generated_text": text}
        else:
            word = payload.get("word")
            if not isinstance(word, str) or not word.strip():
                return _bad_request("'word' must be a non-empty string", scorer.identity)
            body = {"prob": scorer.word_prob(event, dimension, word)}
        return JSONResponse(content=body, headers={"X-Model-Identity": scorer.identity})

    return app
