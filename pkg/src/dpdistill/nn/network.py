"""Sequential network container.

A ``Network`` owns an ordered list of layers plus the seed used to draw its
initial parameters. Forward passes on fixed parameters and inputs are
bit-reproducible. A network being trained must only be mutated from one
thread; frozen networks may serve inference from many threads concurrently.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .layers import BatchNorm, Dense, Layer, ReLU, Tanh, layer_from_descriptor


class Network:
    def __init__(self, layers: list[Layer], *, rng_seed: int = 0):
        self.layers = list(layers)
        self.rng_seed = int(rng_seed)
        self._layer_inputs = None

    def forward(
        self,
        x: np.ndarray,
        training: bool = False,
        capture_inputs: bool = False,
    ) -> np.ndarray:
        """Run the layer chain; returns logits (or generic outputs).

        With ``capture_inputs`` the per-layer input arrays are kept on the
        network (``layer_inputs``) for statistics losses and gradient taps.
        """
        x = np.asarray(x)
        inputs = [] if capture_inputs else None
        for i, layer in enumerate(self.layers):
            if capture_inputs:
                inputs.append(x)
            try:
                x = layer.forward(x, training=training)
            except ValueError as err:
                raise ValueError(f"layer {i} ({layer.kind}): {err}") from None
        if capture_inputs:
            self._layer_inputs = inputs
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite values in network output")
        return x

    @property
    def layer_inputs(self) -> list:
        if self._layer_inputs is None:
            raise RuntimeError("forward(..., capture_inputs=True) has not been run")
        return self._layer_inputs

    def backward(
        self,
        grad_out: np.ndarray,
        input_grad_taps: dict[int, np.ndarray] | None = None,
    ) -> np.ndarray:
        """Reverse-mode pass; returns the gradient w.r.t. the network input.

        ``input_grad_taps`` maps layer index ``i`` to an extra gradient added
        at the *input* of layer ``i`` (for losses that read intermediate
        activations). Parameter gradients are left on the layers.
        """
        g = np.asarray(grad_out)
        taps = input_grad_taps or {}
        for i in reversed(range(len(self.layers))):
            g = self.layers[i].backward(g)
            if i in taps:
                g = g + taps[i]
        return g

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        """Flat list of (path, array) pairs, e.g. ``("2.weight", ...)``."""
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params().items():
                out.append((f"{i}.{name}", arr))
        return out

    def gradients(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in layer.grads().items():
                out.append((f"{i}.{name}", arr))
        return out

    def batchnorm_layers(self) -> list[tuple[int, BatchNorm]]:
        return [
            (i, layer)
            for i, layer in enumerate(self.layers)
            if isinstance(layer, BatchNorm)
        ]

    def num_params(self) -> int:
        return sum(int(arr.size) for _, arr in self.parameters())

    def descriptors(self) -> list[dict]:
        return [layer.descriptor() for layer in self.layers]

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Parameters followed by persistent layer state (running statistics)."""
        out = list(self.parameters())
        for i, layer in enumerate(self.layers):
            for name, arr in layer.state().items():
                out.append((f"{i}.{name}", np.asarray(arr)))
        return out

    def checksum(self) -> str:
        """SHA-256 over parameters and running statistics; detects any drift."""
        h = hashlib.sha256()
        for path, arr in self.state_arrays():
            h.update(path.encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def copy_parameters(self) -> dict[str, np.ndarray]:
        return {path: arr.copy() for path, arr in self.state_arrays()}

    def restore_parameters(self, snapshot: dict[str, np.ndarray]) -> None:
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params().items():
                arr[...] = snapshot[f"{i}.{name}"]
            state = {
                name: snapshot[f"{i}.{name}"] for name in layer.state().keys()
            }
            if state:
                layer.load_state(state)


def build_mlp(
    in_dim: int,
    hidden: tuple[int, ...],
    out_dim: int,
    *,
    normalization: bool = True,
    activation: str = "relu",
    output_activation: str | None = None,
    seed: int = 0,
    dtype=np.float32,
) -> Network:
    """Perceptron factory: Dense [+ BatchNorm] + activation per hidden layer.

    The same factory realizes teachers, students and generators; generators
    simply use a noise-sized ``in_dim`` and, optionally, a squashing
    ``output_activation`` for image-like targets.
    """
    acts = {"relu": ReLU, "tanh": Tanh}
    if activation not in acts:
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    layers: list[Layer] = []
    prev = in_dim
    for width in hidden:
        layers.append(Dense(prev, width, rng=rng, dtype=dtype))
        if normalization:
            layers.append(BatchNorm(width, dtype=dtype))
        layers.append(acts[activation]())
        prev = width
    layers.append(Dense(prev, out_dim, rng=rng, dtype=dtype))
    if output_activation is not None:
        layers.append(acts[output_activation]())
    return Network(layers, rng_seed=seed)


def network_from_descriptors(
    descriptors: list[dict], *, rng_seed: int = 0, dtype=np.float32
) -> Network:
    rng = np.random.default_rng(np.random.SeedSequence(rng_seed))
    layers = [layer_from_descriptor(d, rng=rng, dtype=dtype) for d in descriptors]
    return Network(layers, rng_seed=rng_seed)
