"""Small dense/convolutional network kernel on float64 numpy arrays.

Every layer runs in double precision and is bit-deterministic: identical
inputs and parameters always yield byte-identical outputs and gradients.
Layers accept a batch as the leading axis and cache whatever the backward
pass needs, so the usage pattern is always forward, then backward, then
read or apply the parameter gradients. Each backward call overwrites the
parameter gradients from that call's upstream signal; gradients do not
accumulate across calls.

Image-like activations are laid out height x width x channels; dense
activations are flat vectors.
"""

from __future__ import annotations

import numpy as np


class Parameter:
    """A learnable array paired with a gradient buffer of equal shape."""

    def __init__(self, value: np.ndarray, name: str = "") -> None:
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad.fill(0.0)


def glorot_uniform(shape: tuple[int, ...], fan_in: int, fan_out: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Uniform init on [-limit, limit] with limit = sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _require_finite(x: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{where}: non-finite values in input")


class Layer:
    """Base class: forward caches, backward consumes the cache once."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def parameters(self) -> list[Parameter]:
        return []


class Conv2D(Layer):
    """Stride-1 2-D convolution with same padding.

    Input (batch, H, W, Cin), filters (kh, kw, Cin, Cout), output
    (batch, H, W, Cout). Filter extents must be odd so that same padding
    is symmetric. Implemented as an im2col matrix product so the heavy
    lifting is a single GEMM per call.
    """

    def __init__(self, in_channels: int, out_channels: int,
                 height: int = 3, width: int = 3,
                 rng: np.random.Generator | None = None) -> None:
        if height % 2 == 0 or width % 2 == 0:
            raise ValueError("Conv2D supports odd filter extents only")
        if rng is None:
            rng = np.random.default_rng()
        fan_in = height * width * in_channels
        fan_out = height * width * out_channels
        self.weights = Parameter(
            glorot_uniform((height, width, in_channels, out_channels),
                           fan_in, fan_out, rng),
            name="conv.weights")
        self.bias = Parameter(np.zeros(out_channels), name="conv.bias")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.height = height
        self.width = width
        self._cols: np.ndarray | None = None
        self._x_shape: tuple[int, ...] | None = None
        self._scratch_key: tuple[int, ...] | None = None
        self._padded: np.ndarray | None = None
        self._dcols: np.ndarray | None = None
        self._dpadded: np.ndarray | None = None

    def _ensure_scratch(self, x_shape: tuple[int, ...]) -> None:
        # Scratch buffers are reused across calls of identical input shape;
        # the padded border stays zero because only the interior is written.
        if self._scratch_key == x_shape:
            return
        batch, h, w, cin = x_shape
        ph, pw = self.height // 2, self.width // 2
        self._padded = np.zeros((batch, h + 2 * ph, w + 2 * pw, cin))
        self._cols = np.empty(
            (batch * h * w, self.height * self.width * cin))
        self._dcols = np.empty(
            (batch, h, w, self.height, self.width, cin))
        self._dpadded = np.empty_like(self._padded)
        self._scratch_key = x_shape

    def forward(self, x: np.ndarray) -> np.ndarray:
        _require_finite(x, "Conv2D.forward")
        if x.ndim != 4 or x.shape[3] != self.in_channels:
            raise ValueError(
                f"Conv2D.forward: expected (batch, H, W, {self.in_channels}), "
                f"got {x.shape}")
        batch, h, w, _ = x.shape
        ph, pw = self.height // 2, self.width // 2
        self._ensure_scratch(x.shape)
        self._padded[:, ph:ph + h, pw:pw + w, :] = x
        windows = np.lib.stride_tricks.sliding_window_view(
            self._padded, (self.height, self.width), axis=(1, 2))
        # windows: (batch, H, W, Cin, kh, kw) -> columns (batch*H*W, kh*kw*Cin)
        cols = self._cols
        cols.reshape(batch, h, w, self.height, self.width,
                     self.in_channels)[...] = windows.transpose(0, 1, 2, 4, 5, 3)
        wmat = self.weights.value.reshape(-1, self.out_channels)
        out = cols @ wmat
        out += self.bias.value
        self._x_shape = x.shape
        return out.reshape(batch, h, w, self.out_channels)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self._cols is None or self._x_shape is None:
            raise RuntimeError("Conv2D.backward called before forward")
        batch, h, w, cin = self._x_shape
        dmat = dout.reshape(batch * h * w, self.out_channels)
        np.matmul(self._cols.T, dmat,
                  out=self.weights.grad.reshape(-1, self.out_channels))
        np.sum(dmat, axis=0, out=self.bias.grad)
        wmat_t = self.weights.value.reshape(-1, self.out_channels).T
        np.matmul(dmat, wmat_t, out=self._dcols.reshape(batch * h * w, -1))
        ph, pw = self.height // 2, self.width // 2
        dpadded = self._dpadded
        dpadded.fill(0.0)
        for i in range(self.height):
            for j in range(self.width):
                dpadded[:, i:i + h, j:j + w, :] += self._dcols[:, :, :, i, j, :]
        return dpadded[:, ph:ph + h, pw:pw + w, :].copy()

    def parameters(self) -> list[Parameter]:
        return [self.weights, self.bias]


class MaxPool2(Layer):
    """2x2 max pooling with ceil-mode output and partial edge windows.

    Output extent is ceil(n / 2) on each spatial axis; odd edges pool a
    partial window. Ties pick the first maximum in row-major window order.
    The winning index per window is cached for the backward scatter.
    """

    def __init__(self) -> None:
        self._scratch_key: tuple[int, ...] | None = None
        self._padded: np.ndarray | None = None
        self._win: np.ndarray | None = None

    def _ensure_scratch(self, x_shape: tuple[int, ...]) -> None:
        # The -inf border of the reused pad buffer survives between calls
        # because forward only overwrites the interior.
        if self._scratch_key == x_shape:
            return
        batch, h, w, ch = x_shape
        ho, wo = (h + 1) // 2, (w + 1) // 2
        self._padded = np.full((batch, 2 * ho, 2 * wo, ch), -np.inf)
        self._win = np.empty((batch, ho, wo, 4, ch))
        self._scratch_key = x_shape

    def forward(self, x: np.ndarray) -> np.ndarray:
        _require_finite(x, "MaxPool2.forward")
        if x.ndim != 4:
            raise ValueError(f"MaxPool2.forward: expected 4-d input, got {x.shape}")
        batch, h, w, ch = x.shape
        ho, wo = (h + 1) // 2, (w + 1) // 2
        self._ensure_scratch(x.shape)
        self._padded[:, :h, :w, :] = x
        # windows axis enumerates (dy, dx) = (0,0),(0,1),(1,0),(1,1)
        win = self._win
        win.reshape(batch, ho, wo, 2, 2, ch)[...] = self._padded.reshape(
            batch, ho, 2, wo, 2, ch).transpose(0, 1, 3, 2, 4, 5)
        self._argmax = np.argmax(win, axis=3)
        self._x_shape = x.shape
        return np.take_along_axis(
            win, self._argmax[:, :, :, None, :], axis=3).reshape(
            batch, ho, wo, ch)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        batch, h, w, ch = self._x_shape
        ho, wo = (h + 1) // 2, (w + 1) // 2
        dwin = np.zeros((batch, ho, wo, 4, ch))
        np.put_along_axis(dwin, self._argmax[:, :, :, None, :],
                          dout[:, :, :, None, :], axis=3)
        dpadded = dwin.reshape(batch, ho, wo, 2, 2, ch).transpose(
            0, 1, 3, 2, 4, 5).reshape(batch, 2 * ho, 2 * wo, ch)
        return dpadded[:, :h, :w, :]


class Dense(Layer):
    """Affine layer: (batch, n_in) @ (n_in, n_out) + bias."""

    def __init__(self, n_in: int, n_out: int,
                 rng: np.random.Generator | None = None) -> None:
        if rng is None:
            rng = np.random.default_rng()
        self.weights = Parameter(
            glorot_uniform((n_in, n_out), n_in, n_out, rng), name="dense.weights")
        self.bias = Parameter(np.zeros(n_out), name="dense.bias")
        self.n_in = n_in
        self.n_out = n_out

    def forward(self, x: np.ndarray) -> np.ndarray:
        _require_finite(x, "Dense.forward")
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ValueError(
                f"Dense.forward: expected (batch, {self.n_in}), got {x.shape}")
        self._x = x
        return x @ self.weights.value + self.bias.value

    def backward(self, dout: np.ndarray) -> np.ndarray:
        np.matmul(self._x.T, dout, out=self.weights.grad)
        np.sum(dout, axis=0, out=self.bias.grad)
        return dout @ self.weights.value.T

    def parameters(self) -> list[Parameter]:
        return [self.weights, self.bias]


class ReLU(Layer):
    """Elementwise max(x, 0); the subgradient at exactly 0 is taken as 0."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._active = x > 0.0
        return np.where(self._active, x, 0.0)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return np.where(self._active, dout, 0.0)


class Sigmoid(Layer):
    """Numerically stable logistic activation."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x, dtype=np.float64)
        pos = x >= 0.0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self._out = out
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout * self._out * (1.0 - self._out)


class Flatten(Layer):
    """Collapse all non-batch axes to one vector per sample."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout.reshape(self._x_shape)


class Network:
    """A plain sequential stack of layers."""

    def __init__(self, layers: list[Layer]) -> None:
        self.layers = layers

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            out = layer.forward(out)
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        grad = np.asarray(dout, dtype=np.float64)
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def parameters(self) -> list[Parameter]:
        params: list[Parameter] = []
        for layer in self.layers:
            params.extend(layer.parameters())
        return params

    def zero_grads(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def layer_output_shapes(self, sample_shape: tuple[int, ...]) -> list[tuple[str, tuple[int, ...]]]:
        """Per-layer (class name, output shape without batch axis) for one sample."""
        out = np.zeros((1,) + tuple(sample_shape))
        shapes = []
        for layer in self.layers:
            out = layer.forward(out)
            shapes.append((type(layer).__name__, out.shape[1:]))
        return shapes
