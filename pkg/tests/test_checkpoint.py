import json

import numpy as np
import pytest

from flowsculpt import (CheckpointError, canonical_json, checkpoint_doc, load_checkpoint,
                        params_from_doc, save_checkpoint)
from flowsculpt.checkpoint import METADATA_KEYS, expected_tensor_shapes
from flowsculpt.nn import (BatchNorm, Dense, NetworkArchitecture, conv_architecture,
                           dense_architecture, init_params)


def _params(seed=0, dtype=np.float64):
    arch = dense_architecture((1, 6, 8), actions=4, hidden=(8,))
    return init_params(arch, np.random.default_rng(seed), dtype)


def _opt_state(params, scale=0.01):
    rng = np.random.default_rng(99)
    return {name: (scale * rng.random(t.shape)).astype(t.dtype)
            for name, t in params.tensors.items()}


def test_round_trip_is_exact(tmp_path):
    params = _params()
    opt = _opt_state(params)
    meta = {"grid": {"h": 6, "w": 8}, "seed": 7, "global_step": 123, "episodes": 45,
            "library_provenance": "surrogate", "lineage": ["abc123"]}
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, params, opt, meta)
    loaded, opt2, meta2 = load_checkpoint(path)
    for name in params.tensors:
        assert np.array_equal(loaded.tensors[name], params.tensors[name])
    for name in opt:
        assert np.array_equal(opt2[name], opt[name])
    assert meta2 == {k: meta[k] for k in METADATA_KEYS}
    assert loaded.arch == params.arch


def test_document_round_trip_is_byte_identical():
    params = _params(3)
    doc = checkpoint_doc(params, _opt_state(params), {"seed": 1})
    text = canonical_json(doc)
    reparsed = json.loads(text)
    assert canonical_json(reparsed) == text
    # and loading + re-documenting also reproduces the bytes
    loaded, opt, meta = params_from_doc(reparsed)
    assert canonical_json(checkpoint_doc(loaded, opt, meta)) == text


def test_float32_checkpoints_round_trip():
    params = _params(5, dtype=np.float32)
    doc = checkpoint_doc(params, None, {})
    loaded, opt, _ = params_from_doc(doc)
    assert loaded.dtype == np.float32
    assert opt is None
    for name in params.tensors:
        assert np.array_equal(loaded.tensors[name], params.tensors[name])


def test_batchnorm_buffers_travel(tmp_path):
    arch = NetworkArchitecture((6,), (Dense(4), BatchNorm(), Dense(2)))
    params = init_params(arch, np.random.default_rng(0))
    buffers = {"L1.running_mean": np.array([1.0, -2.0, 0.5, 0.0]),
               "L1.running_var": np.array([0.9, 1.1, 2.0, 1.0])}
    params = params.with_buffers(buffers)
    path = tmp_path / "bn.json"
    save_checkpoint(path, params, None, {})
    loaded, _, _ = load_checkpoint(path)
    np.testing.assert_array_equal(loaded.buffers["L1.running_mean"],
                                  buffers["L1.running_mean"])
    np.testing.assert_array_equal(loaded.buffers["L1.running_var"],
                                  buffers["L1.running_var"])


def test_rejects_wrong_format_and_version():
    params = _params()
    doc = checkpoint_doc(params, None, {})
    with pytest.raises(CheckpointError):
        params_from_doc({**doc, "format": "other"})
    with pytest.raises(CheckpointError):
        params_from_doc({**doc, "format_version": 2})
    with pytest.raises(CheckpointError):
        params_from_doc({**doc, "dtype": "float16"})


def test_rejects_shape_mismatch_without_partial_state():
    params = _params()
    doc = json.loads(canonical_json(checkpoint_doc(params, None, {})))
    doc["tensors"][0]["shape"] = [1, 1]
    doc["tensors"][0]["values"] = [0.0]
    with pytest.raises(CheckpointError):
        params_from_doc(doc)


def test_rejects_missing_tensor():
    params = _params()
    doc = json.loads(canonical_json(checkpoint_doc(params, None, {})))
    doc["tensors"] = doc["tensors"][1:]
    with pytest.raises(CheckpointError):
        params_from_doc(doc)


def test_rejects_non_finite_values():
    params = _params()
    doc = json.loads(canonical_json(checkpoint_doc(params, None, {})))
    doc["tensors"][0]["values"][0] = 1e999  # json parses this to inf
    with pytest.raises(CheckpointError):
        params_from_doc(doc)


def test_save_rejects_non_finite_tensor(tmp_path):
    params = _params()
    broken = {name: t.copy() for name, t in params.tensors.items()}
    name = next(iter(broken))
    broken[name].ravel()[0] = np.nan
    params = params.with_tensors(broken)
    with pytest.raises(CheckpointError):
        save_checkpoint(tmp_path / "x.json", params, None, {})


def test_expect_arch_guard():
    params = _params()
    doc = checkpoint_doc(params, None, {})
    other = dense_architecture((1, 6, 8), actions=4, hidden=(16,))
    with pytest.raises(CheckpointError):
        params_from_doc(doc, expect_arch=other)
    params_from_doc(doc, expect_arch=params.arch)  # matching arch is fine


def test_expected_tensor_shapes_covers_conv_stack():
    arch = conv_architecture((1, 12, 32))
    shapes = expected_tensor_shapes(arch)
    assert shapes["tensors"]["L0.w"] == (32, 1, 3, 3)
    assert shapes["tensors"]["L3.w"] == (64, 32, 3, 3)
    assert shapes["buffers"]["L1.running_mean"] == (32,)
    assert shapes["tensors"]["L7.w"] == (1536, 128)
    params = init_params(arch, np.random.default_rng(0))
    assert {n: t.shape for n, t in params.tensors.items()} == shapes["tensors"]
    assert {n: t.shape for n, t in params.buffers.items()} == shapes["buffers"]


def test_metadata_defaults_to_none(tmp_path):
    params = _params()
    path = tmp_path / "bare.json"
    save_checkpoint(path, params, None)
    _, _, meta = load_checkpoint(path)
    assert meta["grid"] is None
    assert meta["lineage"] == []
    assert meta["global_step"] == 0
