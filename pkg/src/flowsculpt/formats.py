"""Text document formats for shapes and pillar libraries.

Everything is JSON with one canonical rendering (two-space indent, sorted
keys, trailing newline) so serialize -> parse -> serialize is byte-identical
and the CLI and the service can be compared byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import AdvectionMap, FlowShape, GridSpec, PillarLibrary, apply_sequence, pmr
from .errors import DocumentError, GridMismatchError, ParameterError

LIBRARY_FORMAT = "flowsculpt.library"
LIBRARY_VERSION = 1


def canonical_json(doc) -> str:
    """The one true rendering used for every document this toolkit writes."""
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False,
                      allow_nan=False) + "\n"


def write_document(path, doc) -> None:
    Path(path).write_text(canonical_json(doc), encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: not valid JSON ({exc})") from exc


# --- shape documents -------------------------------------------------------

def shape_to_doc(shape: FlowShape) -> dict:
    rows = ["".join("1" if v else "0" for v in row) for row in shape.as_rows()]
    return {"h": shape.grid.h, "w": shape.grid.w, "rows": rows}


def shape_from_doc(doc) -> FlowShape:
    if not isinstance(doc, dict):
        raise DocumentError("shape document must be an object")
    try:
        h, w, rows = int(doc["h"]), int(doc["w"]), doc["rows"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentError(f"shape document missing h/w/rows: {exc}") from exc
    if not isinstance(rows, list) or len(rows) != h:
        raise DocumentError(f"shape document needs exactly {h} rows")
    pixels = np.empty(h * w, dtype=np.uint8)
    for i, row in enumerate(rows):
        if not isinstance(row, str) or len(row) != w:
            raise DocumentError(f"row {i} must be a string of length {w}")
        if set(row) - {"0", "1"}:
            raise DocumentError(f"row {i} contains characters outside 0/1")
        pixels[i * w:(i + 1) * w] = [1 if ch == "1" else 0 for ch in row]
    try:
        return FlowShape(GridSpec(h, w), pixels)
    except ParameterError as exc:
        raise DocumentError(str(exc)) from exc


def save_shape(path, shape: FlowShape) -> None:
    write_document(path, shape_to_doc(shape))


def load_shape(path) -> FlowShape:
    return shape_from_doc(read_json(path))


# --- library documents -----------------------------------------------------

def library_to_doc(lib: PillarLibrary) -> dict:
    return {
        "format": LIBRARY_FORMAT,
        "format_version": LIBRARY_VERSION,
        "grid": {"h": lib.grid.h, "w": lib.grid.w},
        "provenance": lib.provenance,
        "actions": [
            {"id": m.action_id, "src_index": [int(v) for v in m.src_index]}
            for m in lib.maps
        ],
    }


def library_from_doc(doc) -> PillarLibrary:
    if not isinstance(doc, dict) or doc.get("format") != LIBRARY_FORMAT:
        raise DocumentError(f"not a {LIBRARY_FORMAT} document")
    if doc.get("format_version") != LIBRARY_VERSION:
        raise DocumentError(f"unsupported library format version {doc.get('format_version')!r}")
    try:
        grid = GridSpec(int(doc["grid"]["h"]), int(doc["grid"]["w"]))
        provenance = doc["provenance"]
        entries = doc["actions"]
    except (KeyError, TypeError, ValueError, ParameterError) as exc:
        raise DocumentError(f"malformed library document: {exc}") from exc
    maps = []
    for k, entry in enumerate(entries):
        try:
            action_id = int(entry["id"])
            src = np.asarray(entry["src_index"], dtype=np.int64)
            maps.append(AdvectionMap(grid, action_id, src))
        except (KeyError, TypeError, ValueError, ParameterError) as exc:
            raise DocumentError(f"library action {k} malformed: {exc}") from exc
    try:
        return PillarLibrary(grid, tuple(maps), provenance=provenance)
    except ParameterError as exc:
        raise DocumentError(str(exc)) from exc


def save_library(path, lib: PillarLibrary) -> None:
    write_document(path, library_to_doc(lib))


def load_library(path) -> PillarLibrary:
    return library_from_doc(read_json(path))


# --- small text specs ------------------------------------------------------

def parse_sequence(text: str, actions: int) -> list[int]:
    """Parse "22, 11, 31" or "22 11 31"; names the offending token."""
    text = text.strip()
    if not text:
        return []
    out = []
    for tok in text.replace(",", " ").split():
        try:
            value = int(tok)
        except ValueError:
            raise ParameterError(f"sequence token {tok!r} is not an integer") from None
        if not 0 <= value < actions:
            raise ParameterError(f"sequence token {tok!r} outside action range [0, {actions})")
        out.append(value)
    return out


def parse_grid(text: str) -> GridSpec:
    """Parse "12x32" into a grid spec."""
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ParameterError(f"grid spec {text!r} must look like HxW, e.g. 12x32")
    try:
        return GridSpec(int(parts[0]), int(parts[1]))
    except ValueError:
        raise ParameterError(f"grid spec {text!r} must use integers") from None


def parse_inlet(text: str) -> tuple[float, float]:
    """Parse "0.375:0.625" into inlet stripe fractions."""
    parts = text.split(":")
    if len(parts) != 2:
        raise ParameterError(f"inlet spec {text!r} must look like LO:HI, e.g. 0.375:0.625")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise ParameterError(f"inlet spec {text!r} must use numbers") from None
    return lo, hi


def simulate_doc(shape: FlowShape, sequence, library: PillarLibrary,
                 target: FlowShape | None = None) -> dict:
    """Document with every intermediate shape of a pillar sequence.

    ``steps`` starts at the input shape; ``final`` repeats the last entry for
    callers that only want the outcome. With a target, ``pmr`` scores every
    step against it (same order as ``steps``).
    """
    steps = [shape] + apply_sequence(shape, sequence, library)
    doc = {
        "sequence": [int(a) for a in sequence],
        "steps": [shape_to_doc(s) for s in steps],
        "final": shape_to_doc(steps[-1]),
    }
    if target is not None:
        if target.grid != shape.grid:
            raise GridMismatchError(
                f"target grid {target.grid.h}x{target.grid.w} does not match "
                f"input grid {shape.grid.h}x{shape.grid.w}")
        doc["pmr"] = [pmr(s, target) for s in steps]
    return doc
