"""Self-describing text checkpoints for agent parameters.

One JSON document holds the architecture, run metadata, every weight tensor
(row-major float values), and the optimizer's second-moment accumulators.
Round-trips are bit-exact.  Field names:

  format, format_version       document tag ("flowsculpt.checkpoint", 1)
  architecture                 {input_shape, layers: [{type, ...}]}
  grid                         {h, w} of the training environment (or null)
  seed, global_step, episodes  training provenance
  library_provenance           "surrogate" | "file" | null
  lineage                      checkpoint ids this run was warm-started from
  dtype                        "float64" | "float32"
  tensors / buffers            [{name, shape, values}]
  opt                          {algorithm: "rmsprop", tensors: [...]}
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import GridSpec
from .errors import CheckpointError
from .formats import canonical_json, read_json
from .nn import (BatchNorm, Conv, Dense, NetworkArchitecture, QNetworkParams, arch_from_doc,
                 arch_to_doc)

CHECKPOINT_FORMAT = "flowsculpt.checkpoint"
CHECKPOINT_VERSION = 1

METADATA_KEYS = ("grid", "seed", "global_step", "episodes", "library_provenance", "lineage")


def _tensor_entries(arrays: dict[str, np.ndarray]) -> list[dict]:
    entries = []
    for name in sorted(arrays):
        arr = arrays[name]
        if not np.isfinite(arr).all():
            raise CheckpointError(f"tensor {name} contains non-finite values")
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "values": [float(v) for v in arr.ravel()],
        })
    return entries


def _tensor_dict(entries, dtype, what: str) -> dict[str, np.ndarray]:
    out = {}
    try:
        for entry in entries:
            arr = np.asarray(entry["values"], dtype=dtype).reshape(entry["shape"])
            out[entry["name"]] = arr
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed {what} entry: {exc}") from exc
    return out


def checkpoint_doc(params: QNetworkParams, opt_state: dict[str, np.ndarray] | None,
                   metadata: dict | None = None) -> dict:
    md = dict(metadata or {})
    grid = md.get("grid")
    if isinstance(grid, GridSpec):
        grid = {"h": grid.h, "w": grid.w}
    doc = {
        "format": CHECKPOINT_FORMAT,
        "format_version": CHECKPOINT_VERSION,
        "architecture": arch_to_doc(params.arch),
        "dtype": str(np.dtype(params.dtype)),
        "grid": grid,
        "seed": md.get("seed"),
        "global_step": int(md.get("global_step", 0)),
        "episodes": int(md.get("episodes", 0)),
        "library_provenance": md.get("library_provenance"),
        "lineage": list(md.get("lineage", [])),
        "tensors": _tensor_entries(params.tensors),
        "buffers": _tensor_entries(params.buffers),
        "opt": {
            "algorithm": "rmsprop",
            "tensors": _tensor_entries(opt_state) if opt_state is not None else [],
        },
    }
    return doc


def save_checkpoint(path, params: QNetworkParams, opt_state: dict[str, np.ndarray] | None,
                    metadata: dict | None = None) -> dict:
    doc = checkpoint_doc(params, opt_state, metadata)
    Path(path).write_text(canonical_json(doc), encoding="utf-8")
    return doc


def params_from_doc(doc: dict, expect_arch: NetworkArchitecture | None = None):
    """(params, opt_state, metadata) from a checkpoint document.

    Validates structure and tensor shapes before constructing anything, so a
    failure leaves no partial state behind.
    """
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"not a {CHECKPOINT_FORMAT} document")
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    try:
        arch = arch_from_doc(doc["architecture"])
    except Exception as exc:
        raise CheckpointError(f"bad architecture in checkpoint: {exc}") from exc
    if expect_arch is not None and arch != expect_arch:
        raise CheckpointError("checkpoint architecture does not match the expected network")
    dtype = np.dtype(doc.get("dtype", "float64"))
    if dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise CheckpointError(f"unsupported tensor dtype {doc.get('dtype')!r}")

    tensors = _tensor_dict(doc.get("tensors", []), dtype, "tensor")
    buffers = _tensor_dict(doc.get("buffers", []), dtype, "buffer")
    expected = expected_tensor_shapes(arch)
    got = {name: arr.shape for name, arr in tensors.items()}
    if got != expected["tensors"]:
        raise CheckpointError("checkpoint tensors do not match the declared architecture")
    if {name: arr.shape for name, arr in buffers.items()} != expected["buffers"]:
        raise CheckpointError("checkpoint buffers do not match the declared architecture")
    for name, arr in tensors.items():
        if not np.isfinite(arr).all():
            raise CheckpointError(f"tensor {name} contains non-finite values")

    opt_entries = doc.get("opt", {}).get("tensors", [])
    opt_state = _tensor_dict(opt_entries, dtype, "optimizer tensor") if opt_entries else None
    if opt_state is not None and {n: a.shape for n, a in opt_state.items()} != expected["tensors"]:
        raise CheckpointError("optimizer state does not match the declared architecture")

    params = QNetworkParams(arch, tensors, buffers)
    metadata = {key: doc.get(key) for key in METADATA_KEYS}
    return params, opt_state, metadata


def load_checkpoint(path, expect_arch: NetworkArchitecture | None = None):
    return params_from_doc(read_json(path), expect_arch)


def expected_tensor_shapes(arch: NetworkArchitecture) -> dict[str, dict]:
    """Tensor and buffer shapes the architecture defines, keyed by name."""
    tensors: dict[str, tuple] = {}
    buffers: dict[str, tuple] = {}
    shapes = arch.layer_shapes()
    cur = arch.input_shape
    for idx, layer in enumerate(arch.layers):
        key = f"L{idx}"
        if isinstance(layer, Conv):
            tensors[f"{key}.w"] = (layer.filters, cur[0], layer.kernel, layer.kernel)
            tensors[f"{key}.b"] = (layer.filters,)
        elif isinstance(layer, Dense):
            tensors[f"{key}.w"] = (cur[0], layer.units)
            tensors[f"{key}.b"] = (layer.units,)
        elif isinstance(layer, BatchNorm):
            tensors[f"{key}.gamma"] = (cur[0],)
            tensors[f"{key}.beta"] = (cur[0],)
            buffers[f"{key}.running_mean"] = (cur[0],)
            buffers[f"{key}.running_var"] = (cur[0],)
        cur = shapes[idx]
    return {"tensors": tensors, "buffers": buffers}
