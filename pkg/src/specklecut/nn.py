"""CNN building blocks: convolution, pooling, activations, dense heads.

Forward and backward passes are written directly on numpy arrays. A
"tensor" throughout is a C-contiguous float array: feature maps are
(height, width, channels) with the channel axis innermost, vectors are
rank 1. Training runs in float32; feeding float64 arrays runs the same
code paths in double precision, which the gradient-check harness uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import (
    MissingForwardCache,
    NonFiniteInput,
    NonPositiveOutput,
    ShapeMismatch,
)

ACTIVATIONS = ("relu", "sigmoid", "tanh", "softmax", "none")


# ---------------------------------------------------------------- layer specs

@dataclass
class ConvLayerSpec:
    """2D convolution; weights laid out (f_h, f_w, in_channels, filters)."""

    filters: int
    kernel: tuple[int, int]
    weights: np.ndarray
    bias: np.ndarray
    stride: tuple[int, int] = (1, 1)
    padding: int = 0
    activation: str = "none"

    def __post_init__(self):
        f_h, f_w = self.kernel
        if f_h < 1 or f_w < 1 or self.stride[0] < 1 or self.stride[1] < 1:
            raise ValueError("kernel and stride extents must be >= 1")
        if self.padding < 0:
            raise ValueError("padding must be >= 0")
        if self.activation not in ("relu", "sigmoid", "tanh", "none"):
            raise ValueError(f"bad conv activation {self.activation!r}")
        if self.weights.shape[0] != f_h or self.weights.shape[1] != f_w \
                or self.weights.shape[3] != self.filters:
            raise ShapeMismatch(
                f"conv weights {self.weights.shape} do not match "
                f"kernel {self.kernel} x filters {self.filters}")
        if self.bias.shape != (self.filters,):
            raise ShapeMismatch("conv bias length must equal filter count")

    @property
    def in_channels(self) -> int:
        return self.weights.shape[2]


@dataclass
class PoolLayerSpec:
    """Max pooling window; zero padding, like every layer here."""

    kernel: tuple[int, int]
    stride: tuple[int, int]
    padding: int = 0

    def __post_init__(self):
        if min(self.kernel) < 1 or min(self.stride) < 1:
            raise ValueError("kernel and stride extents must be >= 1")
        if self.padding < 0:
            raise ValueError("padding must be >= 0")


@dataclass
class FlattenSpec:
    pass


@dataclass
class GapSpec:
    """Global average pooling: one mean per channel."""


@dataclass
class DenseLayerSpec:
    """Affine map y = W^T x + b; weights laid out (in_units, units)."""

    units: int
    weights: np.ndarray
    bias: np.ndarray
    activation: str = "none"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"bad dense activation {self.activation!r}")
        if self.weights.ndim != 2 or self.weights.shape[1] != self.units:
            raise ShapeMismatch(
                f"dense weights {self.weights.shape} do not match units {self.units}")
        if self.bias.shape != (self.units,):
            raise ShapeMismatch("dense bias length must equal units")

    @property
    def in_units(self) -> int:
        return self.weights.shape[0]


LayerSpec = Union[ConvLayerSpec, PoolLayerSpec, FlattenSpec, GapSpec, DenseLayerSpec]


@dataclass
class NetworkSpec:
    input_shape: tuple[int, int, int]
    layers: list = field(default_factory=list)


# ------------------------------------------------------------------- shapes

def conv_output_dims(m, n, f_h, f_w, p, s_h, s_w):
    """Output (height, width) of a conv/pool window sweep, floored."""
    m2 = (m - f_h + 2 * p) // s_h + 1
    n2 = (n - f_w + 2 * p) // s_w + 1
    if m2 < 1 or n2 < 1:
        raise NonPositiveOutput(
            f"kernel ({f_h}x{f_w}, pad {p}) exceeds input ({m}x{n})")
    return m2, n2


def layer_output_shapes(net: NetworkSpec) -> list[tuple]:
    """Shape after each layer, starting from net.input_shape."""
    shape: tuple = tuple(net.input_shape)
    out = []
    for layer in net.layers:
        if isinstance(layer, ConvLayerSpec):
            if len(shape) != 3:
                raise ShapeMismatch("conv layer needs a (h, w, c) input")
            h, w, c = shape
            if c != layer.in_channels:
                raise ShapeMismatch(
                    f"conv expects {layer.in_channels} channels, got {c}")
            h2, w2 = conv_output_dims(h, w, *layer.kernel, layer.padding,
                                      *layer.stride)
            shape = (h2, w2, layer.filters)
        elif isinstance(layer, PoolLayerSpec):
            if len(shape) != 3:
                raise ShapeMismatch("pool layer needs a (h, w, c) input")
            h, w, c = shape
            h2, w2 = conv_output_dims(h, w, *layer.kernel, layer.padding,
                                      *layer.stride)
            shape = (h2, w2, c)
        elif isinstance(layer, FlattenSpec):
            if len(shape) != 3:
                raise ShapeMismatch("flatten needs a (h, w, c) input")
            shape = (shape[0] * shape[1] * shape[2],)
        elif isinstance(layer, GapSpec):
            if len(shape) != 3:
                raise ShapeMismatch("global average pool needs a (h, w, c) input")
            shape = (shape[2],)
        elif isinstance(layer, DenseLayerSpec):
            if len(shape) != 1:
                raise ShapeMismatch("dense layer needs a rank-1 input")
            if shape[0] != layer.in_units:
                raise ShapeMismatch(
                    f"dense expects {layer.in_units} inputs, got {shape[0]}")
            shape = (layer.units,)
        else:
            raise ShapeMismatch(f"unknown layer type {type(layer).__name__}")
        out.append(shape)
    return out


def validate_network(net: NetworkSpec) -> None:
    """Check the full shape chain and the classification head contract."""
    if not net.layers:
        raise ShapeMismatch("network has no layers")
    layer_output_shapes(net)
    last = net.layers[-1]
    if not isinstance(last, DenseLayerSpec):
        raise ShapeMismatch("network must end in a dense layer")
    binary = last.activation == "sigmoid" and last.units == 1
    if last.activation != "softmax" and not binary:
        raise ShapeMismatch(
            "terminal dense layer must use softmax, or sigmoid with 1 unit")
    for layer in net.layers[:-1]:
        if getattr(layer, "activation", None) == "softmax":
            raise ShapeMismatch("softmax is only allowed on the terminal layer")


def count_parameters(net: NetworkSpec) -> int:
    total = 0
    for layer in net.layers:
        if isinstance(layer, ConvLayerSpec):
            f_h, f_w = layer.kernel
            total += layer.filters * (f_h * f_w * layer.in_channels) + layer.filters
        elif isinstance(layer, DenseLayerSpec):
            total += layer.in_units * layer.units + layer.units
    return total


def trainable_layers(net: NetworkSpec):
    """(index, layer) pairs for layers that carry weights, in order."""
    return [(i, l) for i, l in enumerate(net.layers)
            if isinstance(l, (ConvLayerSpec, DenseLayerSpec))]


def parameters(net: NetworkSpec) -> list[np.ndarray]:
    """Flat [w0, b0, w1, b1, ...] view of all trainable arrays."""
    out = []
    for _, layer in trainable_layers(net):
        out.append(layer.weights)
        out.append(layer.bias)
    return out


# -------------------------------------------------------------- activations

def activate(t: np.ndarray, kind: str) -> np.ndarray:
    """Elementwise relu / sigmoid / tanh; shape preserved."""
    t = np.asarray(t)
    if kind == "relu":
        return np.maximum(t, 0)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-t))
    if kind == "tanh":
        return np.tanh(t)
    raise ValueError(f"unknown activation {kind!r}")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Probability vector over the last axis, computed as exp(z - max z)."""
    z = np.asarray(logits)
    if not np.all(np.isfinite(z)):
        raise NonFiniteInput("softmax input must be finite")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _apply_activation(z, kind):
    if kind == "none":
        return z
    if kind == "softmax":
        return softmax(z)
    return activate(z, kind)


def _activation_backward(kind, z, y, g):
    """dL/dz from dL/dy, with z pre-activation and y = f(z)."""
    if kind == "none":
        return g
    if kind == "relu":
        return g * (z > 0)
    if kind == "sigmoid":
        return g * y * (1.0 - y)
    if kind == "tanh":
        return g * (1.0 - y * y)
    if kind == "softmax":
        return y * (g - np.sum(g * y, axis=-1, keepdims=True))
    raise ValueError(f"unknown activation {kind!r}")


# ------------------------------------------------------- batched layer kernels
# All kernels take (n, h, w, c) batches; the public single-sample ops wrap them.

def _window_view(xp, h2, w2, f_h, f_w, s_h, s_w):
    """Gather sliding windows into (n, h2, w2, f_h, f_w, c)."""
    n, _, _, c = xp.shape
    cols = np.empty((n, h2, w2, f_h, f_w, c), dtype=xp.dtype)
    for u in range(f_h):
        for v in range(f_w):
            cols[:, :, :, u, v, :] = \
                xp[:, u:u + h2 * s_h:s_h, v:v + w2 * s_w:s_w, :]
    return cols


def _pad(x, p):
    if p == 0:
        return x
    return np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))


def _unpad_add_windows(dcols, x_shape, p, s_h, s_w):
    """Fold window gradients (n, h2, w2, f_h, f_w, c) back onto the input."""
    n, h, w, c = x_shape
    _, h2, w2, f_h, f_w, _ = dcols.shape
    dxp = np.zeros((n, h + 2 * p, w + 2 * p, c), dtype=dcols.dtype)
    for u in range(f_h):
        for v in range(f_w):
            dxp[:, u:u + h2 * s_h:s_h, v:v + w2 * s_w:s_w, :] += \
                dcols[:, :, :, u, v, :]
    if p == 0:
        return dxp
    return dxp[:, p:-p, p:-p, :]


def _conv_forward_batch(x, layer: ConvLayerSpec):
    n, h, w, c = x.shape
    if c != layer.in_channels:
        raise ShapeMismatch(
            f"conv expects {layer.in_channels} channels, got {c}")
    f_h, f_w = layer.kernel
    s_h, s_w = layer.stride
    h2, w2 = conv_output_dims(h, w, f_h, f_w, layer.padding, s_h, s_w)
    cols = _window_view(_pad(x, layer.padding), h2, w2, f_h, f_w, s_h, s_w)
    cols2 = cols.reshape(n * h2 * w2, f_h * f_w * c)
    z = cols2 @ layer.weights.reshape(f_h * f_w * c, layer.filters)
    z += layer.bias
    return z.reshape(n, h2, w2, layer.filters), cols2


def _conv_backward_batch(x_shape, cols2, layer: ConvLayerSpec, dz):
    n, h, w, c = x_shape
    f_h, f_w = layer.kernel
    h2, w2 = dz.shape[1], dz.shape[2]
    g = dz.reshape(n * h2 * w2, layer.filters)
    db = g.sum(axis=0)
    dw = (cols2.T @ g).reshape(f_h, f_w, c, layer.filters)
    dcols = (g @ layer.weights.reshape(f_h * f_w * c, layer.filters).T)
    dcols = dcols.reshape(n, h2, w2, f_h, f_w, c)
    dx = _unpad_add_windows(dcols, x_shape, layer.padding, *layer.stride)
    return dx, dw, db


def _pool_forward_batch(x, layer: PoolLayerSpec):
    n, h, w, c = x.shape
    f_h, f_w = layer.kernel
    s_h, s_w = layer.stride
    h2, w2 = conv_output_dims(h, w, f_h, f_w, layer.padding, s_h, s_w)
    wins = _window_view(_pad(x, layer.padding), h2, w2, f_h, f_w, s_h, s_w)
    wins = wins.reshape(n, h2, w2, f_h * f_w, c)
    # argmax keeps the first (row-major) occurrence, which fixes tie routing
    arg = wins.argmax(axis=3).astype(np.int32)
    out = np.take_along_axis(wins, arg[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    return out, arg


def _pool_backward_batch(x_shape, layer: PoolLayerSpec, arg, g):
    n, h, w, c = x_shape
    f_h, f_w = layer.kernel
    _, h2, w2, _ = g.shape
    dwins = np.zeros((n, h2, w2, f_h * f_w, c), dtype=g.dtype)
    np.put_along_axis(dwins, arg[:, :, :, None, :].astype(np.intp),
                      g[:, :, :, None, :], axis=3)
    dwins = dwins.reshape(n, h2, w2, f_h, f_w, c)
    return _unpad_add_windows(dwins, x_shape, layer.padding, *layer.stride)


def _dense_forward_batch(x, layer: DenseLayerSpec):
    if x.shape[1] != layer.in_units:
        raise ShapeMismatch(
            f"dense expects {layer.in_units} inputs, got {x.shape[1]}")
    return x @ layer.weights + layer.bias


# --------------------------------------------------------- single-sample ops

def conv2d_forward(x: np.ndarray, layer: ConvLayerSpec) -> np.ndarray:
    """Convolve one (h, w, c) tensor; bias added, activation applied."""
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeMismatch("conv2d_forward expects a (h, w, c) tensor")
    z, _ = _conv_forward_batch(x[None], layer)
    return _apply_activation(z, layer.activation)[0]


def maxpool2d(x: np.ndarray, layer: PoolLayerSpec) -> np.ndarray:
    """Max over each pooling window, per channel."""
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeMismatch("maxpool2d expects a (h, w, c) tensor")
    out, _ = _pool_forward_batch(x[None], layer)
    return out[0]


def global_average_pool(x: np.ndarray) -> np.ndarray:
    """Mean over the spatial axes: (h, w, c) -> (c,)."""
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeMismatch("global_average_pool expects a (h, w, c) tensor")
    return x.mean(axis=(0, 1))


def flatten(x: np.ndarray) -> np.ndarray:
    """Row-major, channel-innermost linearization of (h, w, c)."""
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeMismatch("flatten expects a (h, w, c) tensor")
    return np.ascontiguousarray(x).reshape(-1)


def dense_forward(x: np.ndarray, layer: DenseLayerSpec) -> np.ndarray:
    """y = W^T x + b, then the layer activation."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ShapeMismatch("dense_forward expects a rank-1 tensor")
    z = _dense_forward_batch(x[None], layer)
    return _apply_activation(z, layer.activation)[0]


# --------------------------------------------------------- network forward

class ForwardCache:
    """Per-layer activations recorded during a forward pass.

    network_backward reads this; it is the only mutable state the layer
    math keeps, so one cache per in-flight sample/batch keeps things
    thread-safe.
    """

    def __init__(self):
        self.entries: Optional[list] = None
        self.batch_shape: Optional[tuple] = None

    @property
    def populated(self) -> bool:
        return self.entries is not None


def forward_batch(net: NetworkSpec, xb: np.ndarray,
                  cache: Optional[ForwardCache] = None) -> np.ndarray:
    """Batched forward over (n, h, w, c); fills `cache` when given."""
    entries = [] if cache is not None else None
    a = xb
    for layer in net.layers:
        if isinstance(layer, ConvLayerSpec):
            z, cols2 = _conv_forward_batch(a, layer)
            y = _apply_activation(z, layer.activation)
            if entries is not None:
                entries.append(("conv", a.shape, cols2, z, y))
            a = y
        elif isinstance(layer, PoolLayerSpec):
            out, arg = _pool_forward_batch(a, layer)
            if entries is not None:
                entries.append(("pool", a.shape, arg))
            a = out
        elif isinstance(layer, FlattenSpec):
            if entries is not None:
                entries.append(("flatten", a.shape))
            a = np.ascontiguousarray(a).reshape(a.shape[0], -1)
        elif isinstance(layer, GapSpec):
            if entries is not None:
                entries.append(("gap", a.shape))
            a = a.mean(axis=(1, 2))
        elif isinstance(layer, DenseLayerSpec):
            z = _dense_forward_batch(a, layer)
            y = _apply_activation(z, layer.activation)
            if entries is not None:
                entries.append(("dense", a, z, y))
            a = y
        else:
            raise ShapeMismatch(f"unknown layer type {type(layer).__name__}")
    if cache is not None:
        cache.entries = entries
        cache.batch_shape = xb.shape
    return a


def network_forward(net: NetworkSpec, image: np.ndarray,
                    cache: Optional[ForwardCache] = None) -> np.ndarray:
    """Run all layers on one input tensor of shape net.input_shape."""
    image = np.asarray(image)
    if tuple(image.shape) != tuple(net.input_shape):
        raise ShapeMismatch(
            f"input shape {image.shape} != network input {net.input_shape}")
    return forward_batch(net, image[None], cache)[0]


# --------------------------------------------------------- network backward

@dataclass
class NetworkGradients:
    """Per-layer (dW, db) aligned with net.layers; None for stateless layers."""

    by_layer: list
    input_grad: np.ndarray

    def flat(self) -> list[np.ndarray]:
        """[dw0, db0, dw1, db1, ...] matching nn.parameters(net)."""
        out = []
        for entry in self.by_layer:
            if entry is not None:
                out.append(entry[0])
                out.append(entry[1])
        return out


def network_backward(net: NetworkSpec, cache: ForwardCache,
                     upstream: np.ndarray,
                     from_logits: bool = False) -> NetworkGradients:
    """Backpropagate an upstream gradient through cached activations.

    upstream is dLoss/dOutput for the batch recorded in `cache` (a single
    sample's gradient can be passed for a batch of one, with or without
    the leading axis). With from_logits=True the terminal activation
    derivative is skipped: the caller supplies dLoss/dLogits directly,
    which the fused softmax+CE / sigmoid+BCE losses produce.
    """
    if cache is None or not cache.populated:
        raise MissingForwardCache("run network_forward with this cache first")
    entries = cache.entries
    n = cache.batch_shape[0]
    g = np.asarray(upstream)
    last = entries[-1]
    out_shape = (last[3] if last[0] == "dense" else last[-1]).shape
    if g.shape == out_shape[1:] and n == 1:
        g = g[None]
    if g.shape != out_shape:
        raise ShapeMismatch(
            f"upstream gradient shape {g.shape} != output shape {out_shape}")

    by_layer: list = [None] * len(net.layers)
    terminal = len(net.layers) - 1
    for i in range(terminal, -1, -1):
        layer = net.layers[i]
        entry = entries[i]
        if entry[0] == "conv":
            _, x_shape, cols2, z, y = entry
            dz = _activation_backward(layer.activation, z, y, g)
            g, dw, db = _conv_backward_batch(x_shape, cols2, layer, dz)
            by_layer[i] = (dw, db)
        elif entry[0] == "pool":
            _, x_shape, arg = entry
            g = _pool_backward_batch(x_shape, layer, arg, g)
        elif entry[0] == "flatten":
            g = g.reshape(entry[1])
        elif entry[0] == "gap":
            _, x_shape = entry
            scale = x_shape[1] * x_shape[2]
            g = np.broadcast_to(
                g[:, None, None, :] / scale, x_shape).astype(g.dtype)
        elif entry[0] == "dense":
            _, x, z, y = entry
            if from_logits and i == terminal:
                dz = g
            else:
                dz = _activation_backward(layer.activation, z, y, g)
            by_layer[i] = (x.T @ dz, dz.sum(axis=0))
            g = dz @ layer.weights.T
        else:  # pragma: no cover - cache entries mirror the layer list
            raise ShapeMismatch(f"corrupt cache entry {entry[0]!r}")
    return NetworkGradients(by_layer=by_layer, input_grad=g)
