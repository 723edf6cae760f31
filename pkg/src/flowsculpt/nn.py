"""Q-network layers with hand-written forward and backward passes.

No autograd framework: each layer type carries an analytic backward pass,
verified against central finite differences in the test suite.  Math runs in
float64 by default; float32 is available as a fast mode.  Parameters are
treated as immutable snapshots — updates allocate new tensors — so frozen
copies can serve inference concurrently while training proceeds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import NumericError, ParameterError


@dataclass(frozen=True)
class Conv:
    filters: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1


@dataclass(frozen=True)
class BatchNorm:
    momentum: float = 0.1
    eps: float = 1e-5


@dataclass(frozen=True)
class MaxPool:
    window: int = 2


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Dense:
    units: int


@dataclass(frozen=True)
class ReLU:
    pass


LayerSpec = Union[Conv, BatchNorm, MaxPool, Flatten, Dense, ReLU]


@dataclass(frozen=True)
class NetworkArchitecture:
    """Layer stack plus the (channel, height, width) or (features,) input shape."""

    input_shape: tuple[int, ...]
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, "layers", tuple(self.layers))
        self.layer_shapes()  # validates

    def layer_shapes(self) -> list[tuple[int, ...]]:
        """Shape after each layer; raises if the stack is inconsistent."""
        shapes = []
        cur = self.input_shape
        if len(cur) not in (1, 3) or any(d < 1 for d in cur):
            raise ParameterError(f"unsupported input shape {cur}")
        for idx, layer in enumerate(self.layers):
            if isinstance(layer, Conv):
                if len(cur) != 3:
                    raise ParameterError(f"layer {idx}: conv needs (C,H,W) input, got {cur}")
                c, h, w = cur
                k, s, p = layer.kernel, layer.stride, layer.padding
                ho = (h + 2 * p - k) // s + 1
                wo = (w + 2 * p - k) // s + 1
                if k < 1 or s < 1 or p < 0 or ho < 1 or wo < 1:
                    raise ParameterError(f"layer {idx}: conv geometry invalid for input {cur}")
                cur = (layer.filters, ho, wo)
            elif isinstance(layer, MaxPool):
                if len(cur) != 3:
                    raise ParameterError(f"layer {idx}: maxpool needs (C,H,W) input, got {cur}")
                c, h, w = cur
                if layer.window < 1 or h < layer.window or w < layer.window:
                    raise ParameterError(f"layer {idx}: pool window {layer.window} too large for {cur}")
                cur = (c, h // layer.window, w // layer.window)
            elif isinstance(layer, BatchNorm):
                pass  # shape preserved; per-channel on 3-D, per-feature on 1-D
            elif isinstance(layer, Flatten):
                cur = (int(np.prod(cur)),)
            elif isinstance(layer, Dense):
                if len(cur) != 1:
                    raise ParameterError(f"layer {idx}: dense needs flat input, got {cur}")
                if layer.units < 1:
                    raise ParameterError(f"layer {idx}: dense units must be positive")
                cur = (layer.units,)
            elif isinstance(layer, ReLU):
                pass
            else:
                raise ParameterError(f"layer {idx}: unknown layer spec {layer!r}")
            shapes.append(cur)
        return shapes

    @property
    def output_units(self) -> int:
        final = self.layer_shapes()[-1] if self.layers else self.input_shape
        if len(final) != 1:
            raise ParameterError(f"network output must be a flat vector, got {final}")
        return final[0]


def dense_architecture(input_shape: tuple[int, ...], actions: int = 32,
                       hidden: tuple[int, ...] = (128, 64)) -> NetworkArchitecture:
    """Desk-scale default: flatten then fully-connected stack with ReLUs."""
    layers: list[LayerSpec] = [Flatten()]
    for units in hidden:
        layers += [Dense(units), ReLU()]
    layers.append(Dense(actions))
    return NetworkArchitecture(tuple(input_shape), tuple(layers))


def conv_architecture(input_shape: tuple[int, ...], actions: int = 32) -> NetworkArchitecture:
    """Convolutional variant: two conv/batch-norm/pool blocks then FC 128/64.

    Kernel 3, stride 1, padding 1 and 2x2 pooling are defaults of this
    toolkit; batch population statistics feed the running averages.
    """
    layers: tuple[LayerSpec, ...] = (
        Conv(32), BatchNorm(), MaxPool(2),
        Conv(64), BatchNorm(), MaxPool(2),
        Flatten(),
        Dense(128), BatchNorm(),
        Dense(64),
        Dense(actions),
    )
    return NetworkArchitecture(tuple(input_shape), layers)


# Architecture documents (used by checkpoints and run configs).

def arch_to_doc(arch: NetworkArchitecture) -> dict:
    layers = []
    for layer in arch.layers:
        if isinstance(layer, Conv):
            layers.append({"type": "conv", "filters": layer.filters, "kernel": layer.kernel,
                           "stride": layer.stride, "padding": layer.padding})
        elif isinstance(layer, BatchNorm):
            layers.append({"type": "batchnorm", "momentum": layer.momentum, "eps": layer.eps})
        elif isinstance(layer, MaxPool):
            layers.append({"type": "maxpool", "window": layer.window})
        elif isinstance(layer, Flatten):
            layers.append({"type": "flatten"})
        elif isinstance(layer, Dense):
            layers.append({"type": "dense", "units": layer.units})
        elif isinstance(layer, ReLU):
            layers.append({"type": "relu"})
    return {"input_shape": list(arch.input_shape), "layers": layers}


def arch_from_doc(doc: dict) -> NetworkArchitecture:
    try:
        layers: list[LayerSpec] = []
        for entry in doc["layers"]:
            t = entry["type"]
            if t == "conv":
                layers.append(Conv(int(entry["filters"]), int(entry["kernel"]),
                                   int(entry["stride"]), int(entry["padding"])))
            elif t == "batchnorm":
                layers.append(BatchNorm(float(entry.get("momentum", 0.1)),
                                        float(entry.get("eps", 1e-5))))
            elif t == "maxpool":
                layers.append(MaxPool(int(entry["window"])))
            elif t == "flatten":
                layers.append(Flatten())
            elif t == "dense":
                layers.append(Dense(int(entry["units"])))
            elif t == "relu":
                layers.append(ReLU())
            else:
                raise ParameterError(f"unknown layer type {t!r}")
        return NetworkArchitecture(tuple(int(d) for d in doc["input_shape"]), tuple(layers))
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"malformed architecture document: {exc}") from exc


def _freeze(arrays: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    for arr in arrays.values():
        arr.setflags(write=False)
    return arrays


@dataclass(frozen=True)
class QNetworkParams:
    """Per-layer weight tensors plus batch-norm running statistics."""

    arch: NetworkArchitecture
    tensors: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray]

    @property
    def count(self) -> int:
        return sum(t.size for t in self.tensors.values())

    @property
    def dtype(self):
        return next(iter(self.tensors.values())).dtype if self.tensors else np.float64

    def with_tensors(self, tensors: dict[str, np.ndarray]) -> "QNetworkParams":
        return QNetworkParams(self.arch, _freeze(tensors), self.buffers)

    def with_buffers(self, buffers: dict[str, np.ndarray]) -> "QNetworkParams":
        return QNetworkParams(self.arch, self.tensors, _freeze(buffers))

    def copy(self) -> "QNetworkParams":
        return QNetworkParams(self.arch,
                              _freeze({k: v.copy() for k, v in self.tensors.items()}),
                              _freeze({k: v.copy() for k, v in self.buffers.items()}))


def init_params(arch: NetworkArchitecture, rng: np.random.Generator,
                dtype=np.float64) -> QNetworkParams:
    """Glorot-uniform weights, zero biases, unit batch-norm scales.

    Tensors are drawn layer by layer from ``rng`` so a seed pins the full
    initialization.
    """
    tensors: dict[str, np.ndarray] = {}
    buffers: dict[str, np.ndarray] = {}
    shapes = arch.layer_shapes()
    cur = arch.input_shape
    for idx, layer in enumerate(arch.layers):
        key = f"L{idx}"
        if isinstance(layer, Conv):
            c_in = cur[0]
            fan_in = c_in * layer.kernel * layer.kernel
            fan_out = layer.filters * layer.kernel * layer.kernel
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            tensors[f"{key}.w"] = rng.uniform(
                -bound, bound, size=(layer.filters, c_in, layer.kernel, layer.kernel)
            ).astype(dtype)
            tensors[f"{key}.b"] = np.zeros(layer.filters, dtype=dtype)
        elif isinstance(layer, Dense):
            fan_in = cur[0]
            bound = np.sqrt(6.0 / (fan_in + layer.units))
            tensors[f"{key}.w"] = rng.uniform(
                -bound, bound, size=(fan_in, layer.units)).astype(dtype)
            tensors[f"{key}.b"] = np.zeros(layer.units, dtype=dtype)
        elif isinstance(layer, BatchNorm):
            width = cur[0]
            tensors[f"{key}.gamma"] = np.ones(width, dtype=dtype)
            tensors[f"{key}.beta"] = np.zeros(width, dtype=dtype)
            buffers[f"{key}.running_mean"] = np.zeros(width, dtype=dtype)
            buffers[f"{key}.running_var"] = np.ones(width, dtype=dtype)
        cur = shapes[idx]
    return QNetworkParams(arch, _freeze(tensors), _freeze(buffers))


def _im2col(x: np.ndarray, k: int, s: int, p: int):
    n, c, h, w = x.shape
    hp, wp = h + 2 * p, w + 2 * p
    ho = (hp - k) // s + 1
    wo = (wp - k) // s + 1
    if p > 0:
        xp = np.zeros((n, c, hp, wp), dtype=x.dtype)
        xp[:, :, p:p + h, p:p + w] = x
    else:
        xp = x
    cols = np.empty((n, c, k, k, ho, wo), dtype=x.dtype)
    for ki in range(k):
        for kj in range(k):
            cols[:, :, ki, kj] = xp[:, :, ki:ki + s * ho:s, kj:kj + s * wo:s]
    return cols.reshape(n, c * k * k, ho * wo), (ho, wo)


def _col2im(dcols: np.ndarray, x_shape, k: int, s: int, p: int):
    n, c, h, w = x_shape
    hp, wp = h + 2 * p, w + 2 * p
    ho = (hp - k) // s + 1
    wo = (wp - k) // s + 1
    dxp = np.zeros((n, c, hp, wp), dtype=dcols.dtype)
    dc = dcols.reshape(n, c, k, k, ho, wo)
    for ki in range(k):
        for kj in range(k):
            dxp[:, :, ki:ki + s * ho:s, kj:kj + s * wo:s] += dc[:, :, ki, kj]
    return dxp[:, :, p:p + h, p:p + w] if p > 0 else dxp


def _bn_axes(x: np.ndarray):
    return (0, 2, 3) if x.ndim == 4 else (0,)


def _bn_reshape(v: np.ndarray, x: np.ndarray):
    return v.reshape(1, -1, 1, 1) if x.ndim == 4 else v


def _forward(params: QNetworkParams, x: np.ndarray, train: bool):
    """Returns (output, caches, new_buffers); caches is None unless training."""
    arch = params.arch
    if x.shape[1:] != arch.input_shape:
        raise ParameterError(
            f"input shape {x.shape[1:]} does not match network input {arch.input_shape}")
    x = np.ascontiguousarray(x, dtype=params.dtype)
    if not np.isfinite(x).all():
        raise NumericError("non-finite network input")
    caches = [] if train else None
    new_buffers = dict(params.buffers) if train else params.buffers
    for idx, layer in enumerate(arch.layers):
        key = f"L{idx}"
        if isinstance(layer, Dense):
            w, b = params.tensors[f"{key}.w"], params.tensors[f"{key}.b"]
            out = x @ w + b
            if train:
                caches.append(("dense", key, x))
            x = out
        elif isinstance(layer, ReLU):
            mask = x > 0
            if train:
                caches.append(("relu", key, mask))
            x = np.where(mask, x, 0.0)
        elif isinstance(layer, Flatten):
            shape = x.shape
            if train:
                caches.append(("flatten", key, shape))
            x = x.reshape(shape[0], -1)
        elif isinstance(layer, Conv):
            w, b = params.tensors[f"{key}.w"], params.tensors[f"{key}.b"]
            f = w.shape[0]
            cols, (ho, wo) = _im2col(x, layer.kernel, layer.stride, layer.padding)
            out = np.matmul(w.reshape(f, -1), cols) + b[:, None]
            out = out.reshape(x.shape[0], f, ho, wo)
            if train:
                caches.append(("conv", key, (x.shape, cols)))
            x = out
        elif isinstance(layer, MaxPool):
            win = layer.window
            n, c, h, w_ = x.shape
            ho, wo = h // win, w_ // win
            xr = x[:, :, :ho * win, :wo * win]
            xr = xr.reshape(n, c, ho, win, wo, win).transpose(0, 1, 2, 4, 3, 5)
            xr = xr.reshape(n, c, ho, wo, win * win)
            idx_max = xr.argmax(-1)  # first max wins ties
            out = np.take_along_axis(xr, idx_max[..., None], -1)[..., 0]
            if train:
                caches.append(("maxpool", key, (x.shape, idx_max)))
            x = out
        elif isinstance(layer, BatchNorm):
            gamma, beta = params.tensors[f"{key}.gamma"], params.tensors[f"{key}.beta"]
            if train:
                axes = _bn_axes(x)
                mu = x.mean(axis=axes)
                var = x.var(axis=axes)  # population variance
                ivstd = 1.0 / np.sqrt(var + layer.eps)
                xhat = (x - _bn_reshape(mu, x)) * _bn_reshape(ivstd, x)
                m = layer.momentum
                new_buffers[f"{key}.running_mean"] = (
                    (1 - m) * params.buffers[f"{key}.running_mean"] + m * mu)
                new_buffers[f"{key}.running_var"] = (
                    (1 - m) * params.buffers[f"{key}.running_var"] + m * var)
                caches.append(("batchnorm", key, (xhat, ivstd, x - _bn_reshape(mu, x), layer)))
                x = _bn_reshape(gamma, x) * xhat + _bn_reshape(beta, x)
            else:
                rm = params.buffers[f"{key}.running_mean"]
                rv = params.buffers[f"{key}.running_var"]
                xhat = (x - _bn_reshape(rm, x)) / np.sqrt(_bn_reshape(rv, x) + layer.eps)
                x = _bn_reshape(gamma, x) * xhat + _bn_reshape(beta, x)
    return x, caches, new_buffers


def forward(params: QNetworkParams, x: np.ndarray) -> np.ndarray:
    """Inference pass; batch norm (if present) uses running statistics."""
    out, _, _ = _forward(params, x, train=False)
    if not np.isfinite(out).all():
        raise NumericError("non-finite network output")
    return out


def forward_train(params: QNetworkParams, x: np.ndarray):
    """Training pass: (output, caches, updated-buffer dict)."""
    return _forward(params, x, train=True)


def backward(params: QNetworkParams, caches, dout: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic gradients of a scalar loss wrt every trainable tensor."""
    grads = {name: np.zeros_like(t) for name, t in params.tensors.items()}
    dx = dout
    for kind, key, cache in reversed(caches):
        if kind == "dense":
            x = cache
            grads[f"{key}.w"] = x.T @ dx
            grads[f"{key}.b"] = dx.sum(axis=0)
            dx = dx @ params.tensors[f"{key}.w"].T
        elif kind == "relu":
            dx = np.where(cache, dx, 0.0)
        elif kind == "flatten":
            dx = dx.reshape(cache)
        elif kind == "conv":
            x_shape, cols = cache
            layer = params.arch.layers[int(key[1:])]
            w = params.tensors[f"{key}.w"]
            f = w.shape[0]
            d2 = dx.reshape(dx.shape[0], f, -1)
            grads[f"{key}.w"] = np.matmul(d2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
            grads[f"{key}.b"] = d2.sum(axis=(0, 2))
            dcols = np.matmul(w.reshape(f, -1).T, d2)
            dx = _col2im(dcols, x_shape, layer.kernel, layer.stride, layer.padding)
        elif kind == "maxpool":
            x_shape, idx_max = cache
            layer = params.arch.layers[int(key[1:])]
            win = layer.window
            n, c, h, w_ = x_shape
            ho, wo = h // win, w_ // win
            dxr = np.zeros((n, c, ho, wo, win * win), dtype=dx.dtype)
            np.put_along_axis(dxr, idx_max[..., None], dx[..., None], -1)
            dxr = dxr.reshape(n, c, ho, wo, win, win).transpose(0, 1, 2, 4, 3, 5)
            full = np.zeros(x_shape, dtype=dx.dtype)
            full[:, :, :ho * win, :wo * win] = dxr.reshape(n, c, ho * win, wo * win)
            dx = full
        elif kind == "batchnorm":
            xhat, ivstd, xc, layer = cache
            gamma = params.tensors[f"{key}.gamma"]
            axes = _bn_axes(dx)
            m = float(np.prod([dx.shape[a] for a in axes]))
            grads[f"{key}.gamma"] = (dx * xhat).sum(axis=axes)
            grads[f"{key}.beta"] = dx.sum(axis=axes)
            dxhat = dx * _bn_reshape(gamma, dx)
            ivstd_b = _bn_reshape(ivstd, dx)
            dvar = (dxhat * xc * -0.5 * ivstd_b**3).sum(axis=axes)
            dmu = (dxhat * -ivstd_b).sum(axis=axes) + dvar * (-2.0 / m) * xc.sum(axis=axes)
            dx = (dxhat * ivstd_b
                  + _bn_reshape(dvar, dx) * 2.0 * xc / m
                  + _bn_reshape(dmu, dx) / m)
        else:  # pragma: no cover - caches come from _forward
            raise ParameterError(f"unknown cache kind {kind}")
    return grads


def q_loss_and_grads(params: QNetworkParams, x: np.ndarray, actions: np.ndarray,
                     targets: np.ndarray, loss: str = "huber", delta: float = 1.0):
    """Mean Huber/squared error on the taken actions' Q-values.

    Gradient flows only through the taken action of each item; other Q
    outputs are masked.  Returns (loss, grads, new_buffers).
    """
    q, caches, new_buffers = forward_train(params, x)
    n = x.shape[0]
    idx = np.arange(n)
    err = q[idx, actions] - np.asarray(targets, dtype=q.dtype)
    if loss == "huber":
        small = np.abs(err) <= delta
        per_item = np.where(small, 0.5 * err**2, delta * (np.abs(err) - 0.5 * delta))
        dper = np.clip(err, -delta, delta)
    elif loss == "mse":
        per_item = err**2
        dper = 2.0 * err
    else:
        raise ParameterError(f"unknown loss {loss!r}")
    total = float(per_item.mean())
    dq = np.zeros_like(q)
    dq[idx, actions] = dper / n
    grads = backward(params, caches, dq)
    return total, grads, new_buffers
