"""HTTP facade over the simulator, match scoring, and suggestion engine.

Every successful response is rendered through the same canonical JSON writer
the CLI and artifact files use, so a scripted client gets byte-identical
output from either entry point.  Checkpoints are served from a directory
named at app creation or through the FLOWSCULPT_CHECKPOINT_DIR environment
variable.
"""

from __future__ import annotations

import os
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel, Field

from .checkpoint import params_from_doc
from .core import GridSpec, make_inlet, pmr, surrogate_library
from .env import default_env
from .errors import FlowSculptError
from .formats import (canonical_json, library_to_doc, parse_grid, read_json, shape_from_doc,
                      simulate_doc)
from .suggest import suggest, suggestion_to_doc

CHECKPOINT_DIR_ENV = "FLOWSCULPT_CHECKPOINT_DIR"


class ShapeBody(BaseModel):
    h: int
    w: int
    rows: list[str]


class SimulateBody(BaseModel):
    sequence: list[int]
    shape: ShapeBody | None = None
    grid: str | None = Field(None, description="HxW inlet grid when no shape is given")
    target: ShapeBody | None = Field(None, description="score each step against this shape")


class PmrBody(BaseModel):
    generated: ShapeBody
    target: ShapeBody


class SuggestBody(BaseModel):
    checkpoint: str
    target: ShapeBody
    k: int = 1
    seed: int = 0
    pmr_threshold: float | None = None
    max_steps: int | None = None


def _json(doc) -> Response:
    return Response(content=canonical_json(doc), media_type="application/json")


def _unprocessable(loc: list, message: str) -> HTTPException:
    return HTTPException(status_code=422, detail=[{"loc": loc, "msg": message}])


def _shape(body: ShapeBody, loc: list):
    try:
        return shape_from_doc(body.model_dump())
    except FlowSculptError as exc:
        raise _unprocessable(loc, str(exc)) from None


def create_app(checkpoint_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="flowsculpt", docs_url=None, redoc_url=None)
    ckpt_dir = Path(checkpoint_dir if checkpoint_dir is not None
                    else os.environ.get(CHECKPOINT_DIR_ENV, "."))

    def _checkpoint_path(name: str) -> Path:
        if "/" in name or "\\" in name or name.startswith("."):
            raise _unprocessable(["body", "checkpoint"], f"invalid checkpoint name {name!r}")
        path = ckpt_dir / (name if name.endswith(".json") else name + ".json")
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"unknown checkpoint {name!r}")
        return path

    @app.get("/api/library")
    def get_library(h: int = 12, w: int = 32, actions: int = 32) -> Response:
        try:
            library = surrogate_library(GridSpec(h, w), actions)
        except FlowSculptError as exc:
            raise _unprocessable(["query"], str(exc)) from None
        return _json(library_to_doc(library))

    @app.post("/api/simulate")
    def post_simulate(body: SimulateBody) -> Response:
        try:
            if body.shape is not None:
                shape = _shape(body.shape, ["body", "shape"])
                grid = shape.grid
            else:
                grid = parse_grid(body.grid or "12x32")
                shape = make_inlet(grid)
            library = surrogate_library(grid)
            target = (_shape(body.target, ["body", "target"])
                      if body.target is not None else None)
            return _json(simulate_doc(shape, body.sequence, library, target=target))
        except HTTPException:
            raise
        except FlowSculptError as exc:
            raise _unprocessable(["body"], str(exc)) from None

    @app.post("/api/pmr")
    def post_pmr(body: PmrBody) -> Response:
        generated = _shape(body.generated, ["body", "generated"])
        target = _shape(body.target, ["body", "target"])
        try:
            value = pmr(generated, target)
        except FlowSculptError as exc:
            raise _unprocessable(["body"], str(exc)) from None
        return _json(value)

    @app.post("/api/suggest")
    def post_suggest(body: SuggestBody) -> Response:
        target = _shape(body.target, ["body", "target"])
        path = _checkpoint_path(body.checkpoint)
        try:
            params, _, meta = params_from_doc(read_json(path))
        except FlowSculptError as exc:
            raise _unprocessable(["body", "checkpoint"], str(exc)) from None
        grid_doc = meta.get("grid") or {}
        try:
            grid = GridSpec(grid_doc.get("h", target.grid.h), grid_doc.get("w", target.grid.w))
            overrides = {}
            if body.pmr_threshold is not None:
                overrides["pmr_threshold"] = body.pmr_threshold
            if body.max_steps is not None:
                overrides["max_steps"] = body.max_steps
            env = default_env(surrogate_library(grid), **overrides)
            if target.grid != grid:
                raise _unprocessable(["body", "target"],
                                     f"target grid {target.grid.h}x{target.grid.w} does not "
                                     f"match checkpoint grid {grid.h}x{grid.w}")
            results = suggest(params, env, target, k=body.k, seed=body.seed)
        except HTTPException:
            raise
        except FlowSculptError as exc:
            raise _unprocessable(["body"], str(exc)) from None
        return _json({"suggestions": [suggestion_to_doc(s) for s in results]})

    @app.get("/api/checkpoints")
    def get_checkpoints() -> Response:
        entries = []
        if ckpt_dir.is_dir():
            for path in sorted(ckpt_dir.glob("*.json")):
                try:
                    _, _, meta = params_from_doc(read_json(path))
                except FlowSculptError:
                    continue  # unrelated json in the directory
                entries.append({
                    "name": path.stem,
                    "grid": meta.get("grid"),
                    "episodes": meta.get("episodes"),
                    "global_step": meta.get("global_step"),
                    "library_provenance": meta.get("library_provenance"),
                    "lineage": meta.get("lineage"),
                })
        return _json({"checkpoints": entries})

    return app
