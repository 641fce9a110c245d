"""Minimal dense-network building blocks with exact analytic gradients.

Everything is float64 numpy: dense affine layers, batch normalization,
ReLU, inverted dropout, softmax cross-entropy with soft targets, and an
RMSProp optimizer. Layers return explicit caches from their forward
passes and consume them in backward passes, which keeps every gradient
checkable against central finite differences.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np


class ShapeMismatch(ValueError):
    """Operand shapes do not agree."""


class BatchTooSmall(ValueError):
    """Batch statistics need at least two rows."""


class InvalidRate(ValueError):
    """Dropout rate outside [0, 1)."""


def _as_matrix(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D array, got shape {arr.shape}")
    return arr


class DenseLayer:
    """Affine map ``X @ W + b`` with W of shape (in, out)."""

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weights.ndim != 2 or bias.shape != (weights.shape[1],):
            raise ShapeMismatch("weights must be (in, out) and bias (out,)")
        self.weights = weights
        self.bias = bias

    @classmethod
    def init(cls, in_dim: int, out_dim: int, rng: np.random.Generator) -> "DenseLayer":
        scale = np.sqrt(2.0 / in_dim)  # He init, suits ReLU blocks
        return cls(rng.normal(0.0, scale, size=(in_dim, out_dim)), np.zeros(out_dim))

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        if x.shape[1] != self.weights.shape[0]:
            raise ShapeMismatch(
                f"input width {x.shape[1]} != layer fan-in {self.weights.shape[0]}")
        return x @ self.weights + self.bias

    def backward(self, x: np.ndarray, grad_out: np.ndarray):
        """Return (grad_input, grad_weights, grad_bias)."""
        x = _as_matrix(x)
        grad_out = _as_matrix(grad_out)
        if grad_out.shape != (x.shape[0], self.weights.shape[1]):
            raise ShapeMismatch("upstream gradient shape mismatch")
        return grad_out @ self.weights.T, x.T @ grad_out, grad_out.sum(axis=0)


class BatchNormLayer:
    """Per-column batch normalization with running statistics.

    Train mode normalizes with the current batch's population statistics
    and folds them into the running estimates; eval mode uses the running
    estimates only, so single-row and batched eval agree exactly.
    """

    def __init__(self, width: int, momentum: float = 0.99, epsilon: float = 1e-5):
        if not 0.0 < momentum < 1.0:
            raise ValueError("momentum must lie in (0, 1)")
        self.gamma = np.ones(width)
        self.beta = np.zeros(width)
        self.running_mean = np.zeros(width)
        self.running_var = np.ones(width)
        self.momentum = momentum
        self.epsilon = epsilon

    @property
    def width(self) -> int:
        return self.gamma.size

    def forward_train(self, x: np.ndarray, update_running: bool = True):
        x = _as_matrix(x)
        if x.shape[0] < 2:
            raise BatchTooSmall("batch normalization needs >= 2 rows in train mode")
        if x.shape[1] != self.width:
            raise ShapeMismatch("input width != layer width")
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + self.epsilon)
        xhat = (x - mean) * inv_std
        if update_running:
            m = self.momentum
            self.running_mean = m * self.running_mean + (1.0 - m) * mean
            self.running_var = m * self.running_var + (1.0 - m) * var
        return xhat * self.gamma + self.beta, (xhat, inv_std)

    def forward_eval(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        if x.shape[1] != self.width:
            raise ShapeMismatch("input width != layer width")
        inv_std = 1.0 / np.sqrt(self.running_var + self.epsilon)
        return (x - self.running_mean) * inv_std * self.gamma + self.beta

    def backward(self, cache, grad_out: np.ndarray):
        """Return (grad_input, grad_gamma, grad_beta) for a train-mode pass."""
        xhat, inv_std = cache
        grad_out = _as_matrix(grad_out)
        n = xhat.shape[0]
        grad_gamma = np.einsum("ij,ij->j", grad_out, xhat)
        grad_beta = grad_out.sum(axis=0)
        dxhat = grad_out * self.gamma
        correction = xhat * np.einsum("ij,ij->j", dxhat, xhat)
        correction += dxhat.sum(axis=0)
        dxhat *= n
        dxhat -= correction
        dxhat *= inv_std / n
        return dxhat, grad_gamma, grad_beta


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0.0)


def dropout(x: np.ndarray, rate: float, rng: np.random.Generator | None,
            train: bool):
    """Inverted dropout; returns (output, mask). Eval mode is the identity.

    In train mode each unit is zeroed with probability ``rate`` and the
    survivors are scaled by 1/(1-rate), so the expected output equals
    the input and no rescaling is needed at eval time.
    """
    if not 0.0 <= rate < 1.0:
        raise InvalidRate(f"dropout rate {rate!r} outside [0, 1)")
    if not train or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("train-mode dropout with rate > 0 requires an rng")
    # float32 uniforms are plenty for a keep/drop draw and half the cost
    keep = rng.random(x.shape, dtype=np.float32) >= rate
    out = x * keep
    out *= 1.0 / (1.0 - rate)
    return out, (keep, 1.0 / (1.0 - rate))


def dropout_backward(mask, grad_out: np.ndarray) -> np.ndarray:
    if mask is None:
        return grad_out
    keep, inv_keep = mask
    out = grad_out * keep
    out *= inv_keep
    return out


def softmax_xent(logits: np.ndarray, soft_targets: np.ndarray):
    """Mean cross-entropy between row-softmax(logits) and soft targets.

    Returns (loss, grad_logits) with the exact analytic gradient
    (softmax - target) / batch.
    """
    logits = _as_matrix(logits)
    targets = _as_matrix(soft_targets)
    if logits.shape != targets.shape:
        raise ShapeMismatch("logits and targets must share shape")
    row_sums = targets.sum(axis=1)
    if np.any(np.abs(row_sums - 1.0) > 1e-8):
        raise ValueError("target rows must sum to 1")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_p = z - log_norm
    n = logits.shape[0]
    loss = float(-(targets * log_p).sum() / n)
    grad = (np.exp(log_p) - targets) / n
    return loss, grad


@dataclass
class RMSProp:
    """RMSProp with per-parameter squared-gradient accumulators.

    acc <- decay*acc + (1-decay)*g^2 ;  param <- param - lr*g/sqrt(acc+eps)
    """

    learning_rate: float = 1e-3
    decay: float = 0.9
    epsilon: float = 1e-8
    accumulators: dict = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name in params:
            g = grads[name]
            if g.shape != params[name].shape:
                raise ShapeMismatch(f"gradient shape mismatch for {name!r}")
            acc = self.accumulators.get(name)
            if acc is None:
                acc = np.zeros_like(params[name])
            acc = self.decay * acc + (1.0 - self.decay) * g * g
            self.accumulators[name] = acc
            params[name] -= self.learning_rate * g / np.sqrt(acc + self.epsilon)


CHECKPOINT_MAGIC = "nccheckpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(path: str | os.PathLike, tensors: dict[str, np.ndarray],
                    header: dict[str, str] | None = None) -> None:
    """Versioned text container: one ``tensor name ndim dims... values...``
    line per array, 17 significant digits, byte-stable for equal inputs."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n")
        for key in sorted(header or {}):
            value = str((header or {})[key])
            if any(c.isspace() for c in key) or "\n" in value:
                raise ValueError("header keys must be word-like, values single-line")
            fh.write(f"meta {key} {value}\n")
        for name in sorted(tensors):
            arr = np.asarray(tensors[name], dtype=np.float64)
            parts = ["tensor", name, str(arr.ndim)]
            parts.extend(str(d) for d in arr.shape)
            parts.extend(format(v, ".17g") for v in arr.ravel())
            fh.write(" ".join(parts) + "\n")


def load_checkpoint(path: str | os.PathLike):
    """Inverse of save_checkpoint; returns (tensors, header)."""
    tensors: dict[str, np.ndarray] = {}
    header: dict[str, str] = {}
    with open(path) as fh:
        first = fh.readline().split()
        if len(first) != 2 or first[0] != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        if int(first[1]) != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {first[1]}")
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "meta":
                header[parts[1]] = " ".join(parts[2:])
            elif parts[0] == "tensor":
                name = parts[1]
                ndim = int(parts[2])
                shape = tuple(int(d) for d in parts[3:3 + ndim])
                values = np.array([float(v) for v in parts[3 + ndim:]])
                tensors[name] = values.reshape(shape)
            else:
                raise ValueError(f"{path}: unknown record {parts[0]!r}")
    return tensors, header
