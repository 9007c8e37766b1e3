"""FastAPI service exposing the engine's two model roles.

Wire contract:
  POST /v1/embed      {"images": [b64 png/jpeg, ...]}
                      -> {"vectors": [[...], ...], "dimension": D}
                         plus an X-Embedding-Dimension header
  POST /v1/similarity {"text": "...", "images": [...]}
                      -> {"scores": [cosineish in [-1, 1], ...]}
  GET  /v1/health     -> {"status", "models", "dimension"}

Stateless and deterministic: identical payloads produce identical bytes.
400 flags an undecodable image (with its index); 503 means the configured
model failed to load.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel

from . import encoders
from .encoders import ImageDecodeError

logger = logging.getLogger(__name__)


@dataclass
class Settings:
    embed_model: str = "builtin:random-projection"
    similarity_model: str = "builtin:chroma-lexical"
    dimension: int = 384
    seed: int = 1234

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            embed_model=os.environ.get("SIDECAR_EMBED_MODEL", cls.embed_model),
            similarity_model=os.environ.get("SIDECAR_SIMILARITY_MODEL", cls.similarity_model),
            dimension=int(os.environ.get("SIDECAR_DIMENSION", cls.dimension)),
            seed=int(os.environ.get("SIDECAR_SEED", cls.seed)),
        )


class EmbedRequest(BaseModel):
    images: list[str]


class SimilarityRequest(BaseModel):
    text: str
    images: list[str]


def create_app(settings: Settings | None = None) -> FastAPI:
    settings = settings or Settings.from_env()
    app = FastAPI(title="videoquorum-sidecar")
    state: dict = {"embedder": None, "scorer": None, "errors": {}}
    try:
        state["embedder"] = encoders.build_embedder(
            settings.embed_model, settings.dimension, settings.seed
        )
    except LookupError as exc:
        state["errors"]["embed"] = str(exc)
        logger.error("embed model unavailable: %s", exc)
    try:
        state["scorer"] = encoders.build_scorer(settings.similarity_model)
    except LookupError as exc:
        state["errors"]["similarity"] = str(exc)
        logger.error("similarity model unavailable: %s", exc)

    def decode_all(images: list[str]) -> list:
        decoded = []
        for i, payload in enumerate(images):
            try:
                decoded.append(encoders.decode_image(payload))
            except ImageDecodeError as exc:
                raise HTTPException(status_code=400, detail=f"image {i}: {exc}") from exc
        return decoded

    @app.post("/v1/embed")
    def embed(request: EmbedRequest, response: Response) -> dict:
        embedder = state["embedder"]
        if embedder is None:
            raise HTTPException(status_code=503, detail=state["errors"].get("embed", "model not loaded"))
        vectors = embedder.embed(decode_all(request.images))
        response.headers["X-Embedding-Dimension"] = str(embedder.dimension)
        return {"vectors": vectors.tolist(), "dimension": embedder.dimension}

    @app.post("/v1/similarity")
    def similarity(request: SimilarityRequest) -> dict:
        scorer = state["scorer"]
        if scorer is None:
            raise HTTPException(status_code=503, detail=state["errors"].get("similarity", "model not loaded"))
        return {"scores": scorer.score(request.text, decode_all(request.images))}

    @app.get("/v1/health")
    def health() -> dict:
        ok = state["embedder"] is not None and state["scorer"] is not None
        return {
            "status": "ok" if ok else "degraded",
            "models": {"embed": settings.embed_model, "similarity": settings.similarity_model},
            "dimension": settings.dimension,
            "errors": state["errors"],
        }

    return app


def serve() -> None:
    import uvicorn

    host = os.environ.get("SIDECAR_HOST", "127.0.0.1")
    port = int(os.environ.get("SIDECAR_PORT", "8901"))
    uvicorn.run(create_app(), host=host, port=port)
