"""Fully connected network with hand-written backpropagation.

Parameters live in one flat float64 vector. Layout is layer-major; inside a
layer the weight matrix ``W`` (shape ``[out, in]``) comes first in row-major
order, followed by the bias ``b`` (shape ``[out]``). Every layer belongs to a
named group (``backbone``, ``projection`` or ``classifier``) and the groups
occupy contiguous, disjoint index ranges.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .ops import Batch, bce_loss_and_grad
from .rng import Rng

GROUPS = ("backbone", "projection", "classifier")
ACTIVATIONS = ("tanh", "linear")

_model_ids = itertools.count()


@dataclass(frozen=True)
class LayerSpec:
    fan_in: int
    fan_out: int
    activation: str
    group: str

    @property
    def size(self) -> int:
        return self.fan_out * self.fan_in + self.fan_out


def default_layers(input_dim: int = 16) -> list[LayerSpec]:
    return [
        LayerSpec(input_dim, 32, "tanh", "backbone"),
        LayerSpec(32, 32, "tanh", "backbone"),
        LayerSpec(32, 32, "tanh", "projection"),
        LayerSpec(32, 16, "tanh", "projection"),
        LayerSpec(16, 1, "linear", "classifier"),
    ]


@dataclass
class ForwardCache:
    model_id: int
    version: int
    inputs: list[np.ndarray]  # input to each layer
    outputs: list[np.ndarray]  # post-activation output of each layer


class MlpModel:
    def __init__(self, layers: list[LayerSpec], params: np.ndarray | None = None):
        if not layers:
            raise ValueError("model needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.fan_out != nxt.fan_in:
                raise ValueError(f"layer widths do not chain: {prev.fan_out} -> {nxt.fan_in}")
        for spec in layers:
            if spec.activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {spec.activation!r}")
            if spec.group not in GROUPS:
                raise ValueError(f"unknown parameter group {spec.group!r}")
        if layers[-1].fan_out != 1:
            raise ValueError("last layer must produce a single logit")
        order = [GROUPS.index(s.group) for s in layers]
        if order != sorted(order):
            raise ValueError("parameter groups must appear as backbone, projection, classifier")

        self.layers = list(layers)
        self.offsets = [0]
        for spec in layers:
            self.offsets.append(self.offsets[-1] + spec.size)
        self.n_params = self.offsets[-1]

        self.partition: dict[str, slice] = {}
        for g in GROUPS:
            idx = [i for i, s in enumerate(layers) if s.group == g]
            if idx:
                self.partition[g] = slice(self.offsets[idx[0]], self.offsets[idx[-1] + 1])
            else:
                start = self.offsets[sum(1 for s in layers if GROUPS.index(s.group) < GROUPS.index(g))]
                self.partition[g] = slice(start, start)

        if params is None:
            params = np.zeros(self.n_params)
        params = np.array(params, dtype=np.float64)
        if params.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {params.shape}")
        self._params = params
        self._id = next(_model_ids)
        self._version = 0

    @classmethod
    def init(cls, rng: Rng, layers: list[LayerSpec] | None = None) -> "MlpModel":
        """Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero."""
        layers = layers if layers is not None else default_layers()
        chunks = []
        for spec in layers:
            bound = 1.0 / np.sqrt(spec.fan_in)
            chunks.append(rng.uniforms(spec.fan_out * spec.fan_in, -bound, bound))
            chunks.append(np.zeros(spec.fan_out))
        return cls(layers, np.concatenate(chunks))

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def params(self) -> np.ndarray:
        """Read-only view of the flat parameter vector."""
        view = self._params.view()
        view.flags.writeable = False
        return view

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {flat.shape}")
        self._params = flat.copy()
        self._version += 1

    def step(self, update: np.ndarray, lr: float) -> None:
        """In-place ``params -= lr * update``."""
        if update.shape != (self.n_params,):
            raise ValueError(f"update has shape {update.shape}, expected ({self.n_params},)")
        self._params -= lr * update
        self._version += 1

    def copy(self) -> "MlpModel":
        return MlpModel(self.layers, self._params)

    def unflatten(self, flat: np.ndarray | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
        flat = self._params if flat is None else flat
        out = []
        for spec, off in zip(self.layers, self.offsets):
            nw = spec.fan_out * spec.fan_in
            W = flat[off:off + nw].reshape(spec.fan_out, spec.fan_in)
            b = flat[off + nw:off + nw + spec.fan_out]
            out.append((W, b))
        return out

    def flatten(self, weights: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b.ravel()]) for W, b in weights])

    def forward(self, x) -> tuple[np.ndarray, ForwardCache]:
        if isinstance(x, Batch):
            x = x.inputs
        h = np.asarray(x, dtype=np.float64)
        if h.ndim != 2 or h.shape[1] != self.input_dim:
            raise ValueError(f"input width {h.shape[-1]} does not match model input {self.input_dim}")
        inputs, outputs = [], []
        for spec, (W, b) in zip(self.layers, self.unflatten()):
            inputs.append(h)
            z = h @ W.T + b
            h = np.tanh(z) if spec.activation == "tanh" else z
            outputs.append(h)
        return h[:, 0].copy(), ForwardCache(self._id, self._version, inputs, outputs)

    def backward(self, cache: ForwardCache, dlogits) -> np.ndarray:
        if cache.model_id != self._id or cache.version != self._version:
            raise ValueError("stale forward cache: parameters changed since the forward pass")
        delta = np.asarray(dlogits, dtype=np.float64).reshape(-1, 1)
        if delta.shape[0] != cache.inputs[0].shape[0]:
            raise ValueError("upstream gradient length does not match the cached batch")
        grad = np.empty(self.n_params)
        weights = self.unflatten()
        for i in range(len(self.layers) - 1, -1, -1):
            spec = self.layers[i]
            W, _ = weights[i]
            if spec.activation == "tanh":
                a = cache.outputs[i]
                delta = delta * (1.0 - a * a)
            off = self.offsets[i]
            nw = spec.fan_out * spec.fan_in
            grad[off:off + nw] = (delta.T @ cache.inputs[i]).ravel()
            grad[off + nw:off + nw + spec.fan_out] = delta.sum(axis=0)
            if i > 0:
                delta = delta @ W
        return grad

    def loss_and_grad(self, batch: Batch) -> tuple[float, np.ndarray]:
        logits, cache = self.forward(batch.inputs)
        loss, dz = bce_loss_and_grad(logits, batch.labels)
        return loss, self.backward(cache, dz)
