"""Fine-tuning of compressed layers on a small multilayer perceptron.

Pruned layers are updated by masked gradient descent. Shared or quantized
layers keep one trainable value per centroid; each centroid moves by the
sum of the loss gradients of the weights assigned to it, so tying is
preserved by construction.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .compress import SENTINEL, Codebook
from .errors import HamShamError

__all__ = [
    "Layer",
    "ToyNetwork",
    "TiedLayer",
    "TrainingDiverged",
    "forward",
    "loss",
    "gradients",
    "masked_sgd_step",
    "centroid_gradient",
    "cumulative_gradient_step",
    "retrain",
    "write_trace",
]

ACTIVATIONS = ("relu", "identity", "softmax")


@dataclass
class Layer:
    weight: np.ndarray  # (inputs, outputs); a row vector x maps to x @ weight + bias
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.array(self.weight, dtype=np.float64)
        self.bias = np.array(self.bias, dtype=np.float64).reshape(-1)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.bias.shape != (self.weight.shape[1],):
            raise ValueError("bias length must equal the layer's output width")


@dataclass
class ToyNetwork:
    layers: list
    loss: str = "mse"

    def __post_init__(self):
        if self.loss not in ("mse", "cross-entropy"):
            raise ValueError(f"unknown loss {self.loss!r}")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise ValueError("consecutive layer dimensions do not compose")

    @classmethod
    def random(cls, sizes, activations=None, loss="mse", seed=0, scale=None):
        rng = np.random.default_rng(seed)
        activations = activations or ["relu"] * (len(sizes) - 2) + ["identity"]
        layers = []
        for (n, m), act in zip(zip(sizes, sizes[1:]), activations):
            s = scale if scale is not None else 1 / np.sqrt(n)
            layers.append(Layer(rng.normal(0, s, (n, m)), rng.normal(0, 0.1, m), act))
        return cls(layers, loss)


def _activate(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "softmax":
        e = np.exp(z - z.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)
    return z


def _affine(X, layer, backend, container):
    if backend == "dense" or container is None:
        return X @ layer.weight + layer.bias
    from .ham import dot_ham, dot_sham
    dot = dot_ham if backend == "ham" else dot_sham
    return np.array([dot(x, container) for x in X]) + layer.bias


def forward(net: ToyNetwork, X, backend: str = "dense", containers=None, _trace=None):
    """Evaluate the network on the batch ``X`` (one sample per row).

    With ``backend="ham"`` or ``"sham"``, layers listed in ``containers``
    (index -> container) compute their products in the compressed domain.
    """
    A = np.atleast_2d(np.asarray(X, dtype=np.float64))
    containers = containers or {}
    for i, layer in enumerate(net.layers):
        if A.shape[1] != layer.weight.shape[0]:
            raise ValueError(f"layer {i} expects {layer.weight.shape[0]} inputs, got {A.shape[1]}")
        Z = _affine(A, layer, backend, containers.get(i))
        if _trace is not None:
            _trace.append((A, Z))
        A = _activate(Z, layer.activation)
    return A


def loss(net: ToyNetwork, X, Y) -> float:
    out = forward(net, X)
    Y = np.asarray(Y, dtype=np.float64)
    if net.loss == "mse":
        return float(np.mean(np.sum((out - Y) ** 2, axis=1)) / 2)
    return float(-np.mean(np.sum(Y * np.log(np.clip(out, 1e-300, None)), axis=1)))


def gradients(net: ToyNetwork, X, Y):
    """Backpropagated ``(dL/dW, dL/db)`` for every layer."""
    trace = []
    out = forward(net, X, _trace=trace)
    Y = np.asarray(Y, dtype=np.float64)
    batch = out.shape[0]
    last = net.layers[-1].activation
    if net.loss == "cross-entropy" and last == "softmax":
        delta = (out - Y) / batch
    elif net.loss == "mse":
        delta = (out - Y) / batch
        if last == "relu":
            delta = delta * (trace[-1][1] > 0)
        elif last == "softmax":
            # Jacobian-vector product of softmax
            delta = out * (delta - np.sum(delta * out, axis=1, keepdims=True))
    else:
        raise ValueError("cross-entropy loss requires a softmax output layer")
    grads = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        A, _ = trace[i]
        grads[i] = (A.T @ delta, delta.sum(axis=0))
        if i:
            prev = net.layers[i - 1]
            delta = delta @ net.layers[i].weight.T
            if prev.activation == "relu":
                delta = delta * (trace[i - 1][1] > 0)
            elif prev.activation == "softmax":
                s = _activate(trace[i - 1][1], "softmax")
                delta = s * (delta - np.sum(delta * s, axis=1, keepdims=True))
    return grads


def masked_sgd_step(weight: np.ndarray, grad, lr: float, mask) -> None:
    """In-place ``w -= lr * g`` restricted to surviving (mask-true) entries."""
    grad = np.asarray(grad)
    mask = np.asarray(mask, dtype=bool)
    if weight.shape != grad.shape or weight.shape != mask.shape:
        raise ValueError("weight, gradient and mask shapes differ")
    weight[mask] -= lr * grad[mask]


@dataclass
class TiedLayer:
    """A weight matrix expressed as centroids plus a per-entry assignment."""
    centroids: np.ndarray
    assignment: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        self.centroids = np.array(self.centroids, dtype=np.float64)
        self.assignment = np.array(self.assignment, dtype=np.int64)
        if self.mask is None:
            self.mask = self.assignment != SENTINEL
        self.mask = np.array(self.mask, dtype=bool)
        # pruned positions never point at a centroid
        self.assignment[~self.mask] = SENTINEL

    @classmethod
    def from_codebook(cls, codebook: Codebook, mask=None):
        return cls(codebook.centroids, codebook.assignment, mask)

    @property
    def shape(self):
        return self.assignment.shape

    def weight(self) -> np.ndarray:
        out = np.zeros(self.shape)
        hit = self.assignment != SENTINEL
        out[hit] = self.centroids[self.assignment[hit]]
        return out

    def to_codebook(self) -> Codebook:
        return Codebook(self.centroids.copy(), self.assignment.astype(np.int32))

    def merge_duplicates(self) -> None:
        """Fold centroids that reached exactly the same value."""
        values, inverse = np.unique(self.centroids, return_inverse=True)
        if len(values) == len(self.centroids):
            return
        hit = self.assignment != SENTINEL
        self.assignment[hit] = inverse.ravel()[self.assignment[hit]]
        self.centroids = values


def centroid_gradient(tied: TiedLayer, grad) -> np.ndarray:
    """Sum of ``dL/dw_ij`` over the entries assigned to each centroid."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != tied.shape:
        raise ValueError(f"gradient shape {grad.shape} != layer shape {tied.shape}")
    hit = tied.assignment != SENTINEL
    return np.bincount(tied.assignment[hit], weights=grad[hit], minlength=len(tied.centroids))


def cumulative_gradient_step(tied: TiedLayer, grad, lr: float) -> None:
    tied.centroids = tied.centroids - lr * centroid_gradient(tied, grad)
    tied.merge_duplicates()


class TrainingDiverged(HamShamError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def retrain(net: ToyNetwork, compressed: dict, X, Y, epochs: int, lr: float,
            batch_size: int | None = None, seed=0, callback=None):
    """Fine-tune ``net`` while keeping its compressed layers compressed.

    ``compressed`` maps a layer index to either a boolean mask (pruned
    layer, masked SGD) or a :class:`TiedLayer` (shared or quantized layer,
    cumulative-gradient updates). Other layers and all biases train freely.
    Returns the loss before training followed by the loss after each epoch.
    ``callback(epoch, net)`` runs after every epoch.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    rng = np.random.default_rng(seed)
    for i, spec in compressed.items():
        if isinstance(spec, TiedLayer):
            net.layers[i].weight = spec.weight()
        else:
            net.layers[i].weight[~np.asarray(spec, dtype=bool)] = 0.0
    trace = [loss(net, X, Y)]
    batch_size = batch_size or len(X)
    for epoch in range(epochs):
        order = rng.permutation(len(X)) if batch_size < len(X) else np.arange(len(X))
        for start in range(0, len(X), batch_size):
            rows = order[start: start + batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                grads = gradients(net, X[rows], Y[rows])
            for i, (layer, (gW, gb)) in enumerate(zip(net.layers, grads)):
                spec = compressed.get(i)
                if isinstance(spec, TiedLayer):
                    cumulative_gradient_step(spec, gW, lr)
                    layer.weight = spec.weight()
                elif spec is not None:
                    masked_sgd_step(layer.weight, gW, lr, spec)
                else:
                    layer.weight -= lr * gW
                layer.bias -= lr * gb
        with np.errstate(over="ignore", invalid="ignore"):
            trace.append(loss(net, X, Y))
        if not np.isfinite(trace[-1]):
            raise TrainingDiverged(f"loss became {trace[-1]} at epoch {epoch + 1}", trace)
        if callback is not None:
            callback(epoch + 1, net)
    return trace


def write_trace(trace, path) -> None:
    """Write ``epoch,loss`` rows (epoch 0 is the pre-training loss)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "loss"])
        for epoch, value in enumerate(trace):
            w.writerow([epoch, repr(float(value))])
