"""Network layers with hand-written forward and backward passes.

Every layer caches what its backward pass needs during ``forward`` and is
therefore single-writer: one training thread at a time. ``backward`` returns
the gradient with respect to the layer input and stores parameter gradients
on the layer (``grad_<param>`` attributes).
"""

from __future__ import annotations

import numpy as np

BN_EPS = 1e-5


class Layer:
    kind = "base"

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict:
        """Mapping of parameter name to array; arrays are updated in place."""
        return {}

    def grads(self) -> dict:
        return {}

    def state(self) -> dict:
        """Non-parameter arrays to persist (e.g. running statistics)."""
        return {}

    def load_state(self, state: dict) -> None:
        for name, value in state.items():
            getattr(self, name)[...] = value

    def descriptor(self) -> dict:
        raise NotImplementedError

    def output_shape(self, input_shape: tuple) -> tuple:
        return input_shape


class Dense(Layer):
    """Affine map ``x @ weight + bias`` with He-scaled normal init."""

    kind = "dense"

    def __init__(self, in_dim: int, out_dim: int, *, rng=None, dtype=np.float32):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        rng = rng if rng is not None else np.random.default_rng(0)
        scale = np.sqrt(2.0 / in_dim)
        self.weight = (rng.standard_normal((in_dim, out_dim)) * scale).astype(dtype)
        self.bias = np.zeros(out_dim, dtype=dtype)
        self.grad_weight = None
        self.grad_bias = None
        self._x = None

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(
                f"expected input of shape [batch, {self.in_dim}], got {x.shape}"
            )
        self._x = x
        return x @ self.weight + self.bias

    def backward(self, grad_out):
        self.grad_weight = self._x.T @ grad_out
        self.grad_bias = grad_out.sum(axis=0)
        return grad_out @ self.weight.T

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def grads(self):
        return {"weight": self.grad_weight, "bias": self.grad_bias}

    def descriptor(self):
        return {"kind": self.kind, "in_dim": self.in_dim, "out_dim": self.out_dim}

    def output_shape(self, input_shape):
        return (self.out_dim,)


class BatchNorm(Layer):
    """Batch normalization over feature axis for [batch, features] input.

    Keeps exponential moving averages of per-feature mean and (biased)
    variance: ``running = momentum * running + (1 - momentum) * batch``.
    The running buffers are updated only when ``training`` is set; eval-mode
    forward normalizes with the stored running statistics.
    """

    kind = "batchnorm"

    def __init__(self, dim: int, *, momentum: float = 0.9, dtype=np.float32):
        self.dim = int(dim)
        self.momentum = float(momentum)
        self.gamma = np.ones(dim, dtype=dtype)
        self.beta = np.zeros(dim, dtype=dtype)
        self.running_mean = np.zeros(dim, dtype=dtype)
        self.running_var = np.ones(dim, dtype=dtype)
        self.batches_tracked = 0
        self.grad_gamma = None
        self.grad_beta = None
        self._cache = None

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ValueError(
                f"expected input of shape [batch, {self.dim}], got {x.shape}"
            )
        if training:
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            m = self.momentum
            self.running_mean[...] = m * self.running_mean + (1.0 - m) * mean
            self.running_var[...] = m * self.running_var + (1.0 - m) * var
            self.batches_tracked += 1
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        x_hat = (x - mean) * inv_std
        self._cache = (x, x_hat, inv_std, training)
        return self.gamma * x_hat + self.beta

    def backward(self, grad_out):
        x, x_hat, inv_std, training = self._cache
        self.grad_gamma = (grad_out * x_hat).sum(axis=0)
        self.grad_beta = grad_out.sum(axis=0)
        d_xhat = grad_out * self.gamma
        if not training:
            # Running statistics are constants in eval mode.
            return d_xhat * inv_std
        n = x.shape[0]
        # Standard batch-norm backward through the batch mean and variance.
        d_var = (d_xhat * (x - x.mean(axis=0))).sum(axis=0) * (-0.5) * inv_std**3
        d_mean = (-d_xhat * inv_std).sum(axis=0) + d_var * (
            -2.0 * (x - x.mean(axis=0))
        ).mean(axis=0)
        return d_xhat * inv_std + d_var * 2.0 * (x - x.mean(axis=0)) / n + d_mean / n

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.grad_gamma, "beta": self.grad_beta}

    def state(self):
        return {
            "running_mean": self.running_mean,
            "running_var": self.running_var,
            "batches_tracked": np.asarray(self.batches_tracked, dtype=np.int64),
        }

    def load_state(self, state):
        self.running_mean[...] = state["running_mean"]
        self.running_var[...] = state["running_var"]
        self.batches_tracked = int(state["batches_tracked"])

    def descriptor(self):
        return {"kind": self.kind, "dim": self.dim, "momentum": self.momentum}


class ReLU(Layer):
    kind = "relu"

    def __init__(self):
        self._mask = None

    def forward(self, x, training=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0).astype(x.dtype)

    def backward(self, grad_out):
        return np.where(self._mask, grad_out, 0.0).astype(grad_out.dtype)

    def descriptor(self):
        return {"kind": self.kind}


class Tanh(Layer):
    kind = "tanh"

    def __init__(self):
        self._out = None

    def forward(self, x, training=False):
        self._out = np.tanh(x)
        return self._out

    def backward(self, grad_out):
        return grad_out * (1.0 - self._out**2)

    def descriptor(self):
        return {"kind": self.kind}


class Flatten(Layer):
    """Collapse all non-batch axes; used to feed conv features into dense layers."""

    kind = "flatten"

    def __init__(self):
        self._shape = None

    def forward(self, x, training=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._shape)

    def descriptor(self):
        return {"kind": self.kind}

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)


class Conv2d(Layer):
    """Small 2-D convolution: stride 1, no padding, [batch, ch, h, w] layout."""

    kind = "conv2d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 *, rng=None, dtype=np.float32):
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        self.kernel_size = int(kernel_size)
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_channels * kernel_size * kernel_size
        scale = np.sqrt(2.0 / fan_in)
        self.weight = (
            rng.standard_normal((out_channels, in_channels, kernel_size, kernel_size))
            * scale
        ).astype(dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)
        self.grad_weight = None
        self.grad_bias = None
        self._windows = None

    def forward(self, x, training=False):
        k = self.kernel_size
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(
                f"expected input of shape [batch, {self.in_channels}, h, w], "
                f"got {x.shape}"
            )
        if x.shape[2] < k or x.shape[3] < k:
            raise ValueError(
                f"spatial size {x.shape[2:]} smaller than kernel {k}x{k}"
            )
        windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
        self._windows = windows
        out = np.einsum("ncijuv,fcuv->nfij", windows, self.weight)
        return out + self.bias[None, :, None, None]

    def backward(self, grad_out):
        k = self.kernel_size
        self.grad_weight = np.einsum("ncijuv,nfij->fcuv", self._windows, grad_out)
        self.grad_bias = grad_out.sum(axis=(0, 2, 3))
        # Full correlation of the padded output gradient with the flipped kernel.
        padded = np.pad(grad_out, ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1)))
        g_windows = np.lib.stride_tricks.sliding_window_view(
            padded, (k, k), axis=(2, 3)
        )
        flipped = self.weight[:, :, ::-1, ::-1]
        return np.einsum("nfyxuv,fcuv->ncyx", g_windows, flipped)

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def grads(self):
        return {"weight": self.grad_weight, "bias": self.grad_bias}

    def descriptor(self):
        return {
            "kind": self.kind,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": self.kernel_size,
        }

    def output_shape(self, input_shape):
        c, h, w = input_shape
        k = self.kernel_size
        return (self.out_channels, h - k + 1, w - k + 1)


LAYER_KINDS = {
    cls.kind: cls for cls in (Dense, BatchNorm, ReLU, Tanh, Flatten, Conv2d)
}


def layer_from_descriptor(desc: dict, *, rng=None, dtype=np.float32) -> Layer:
    """Rebuild a layer from its ``descriptor()`` dict."""
    desc = dict(desc)
    kind = desc.pop("kind")
    if kind not in LAYER_KINDS:
        raise ValueError(f"unknown layer kind {kind!r}")
    cls = LAYER_KINDS[kind]
    if kind in ("dense", "conv2d"):
        return cls(**desc, rng=rng, dtype=dtype)
    if kind == "batchnorm":
        return cls(desc["dim"], momentum=desc.get("momentum", 0.9), dtype=dtype)
    return cls()
