"""
Forward primitives with reverse-mode rules.

Every primitive computes its output with numpy and hands a backward closure
to ``app.engine.tape.record``. Outside an active tape nothing is recorded.
"""

from typing import Sequence, Tuple

import numpy as np

from app.core.errors import ConfigurationError
from app.engine.operators import BatchNormState, ConvOperator
from app.engine.tape import record
from app.engine.tensor import Parameter, Tensor

MODES = ("train", "eval")


def zeros(shape: Sequence[int], dtype=np.float64) -> Tensor:
    return Tensor(np.zeros(tuple(shape), dtype=dtype))


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got '{mode}'")


def _window(start: int, count: int, stride: int) -> slice:
    return slice(start, start + stride * (count - 1) + 1, stride)


def conv2d(x: Tensor, op: ConvOperator) -> Tensor:
    """Grouped, strided 2-D convolution of a ``(b, m, n, c)`` map."""
    data = x.data
    if data.ndim != 4:
        raise ConfigurationError(f"conv2d expects (b, m, n, c) input, got shape {data.shape}")
    b, m, n, c = data.shape
    if c != op.in_channels:
        raise ConfigurationError(
            f"{op.shared_id}: input has {c} channels, operator expects {op.in_channels}"
        )
    s, t = op.stencil
    ph, pw = op.padding
    stride = op.stride
    mo, no = op.output_extent(m, n)
    if mo < 1 or no < 1:
        raise ConfigurationError(
            f"{op.shared_id}: spatial extent {m}x{n} with padding {op.padding} "
            f"is smaller than the {s}x{t} stencil"
        )

    g = op.groups
    kg = c // g
    og = op.out_channels // g
    dtype = np.result_type(data.dtype, op.weights.dtype)
    xp = np.pad(data.astype(dtype, copy=False), ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    w = op.weights.data.astype(dtype, copy=False).reshape(g, og, kg, s, t)
    rows = b * mo * no

    out = np.zeros((g, rows, og), dtype=dtype)
    for i in range(s):
        for j in range(t):
            patch = xp[:, _window(i, mo, stride), _window(j, no, stride), :]
            patch = patch.reshape(rows, g, kg).transpose(1, 0, 2)
            out += np.matmul(patch, w[:, :, :, i, j].transpose(0, 2, 1))
    y = out.transpose(1, 0, 2).reshape(b, mo, no, op.out_channels)

    def backward(grad: np.ndarray):
        gy = grad.reshape(rows, g, og).transpose(1, 0, 2)
        gxp = np.zeros_like(xp)
        gw = np.zeros((g, og, kg, s, t), dtype=dtype)
        for i in range(s):
            for j in range(t):
                rows_i, cols_j = _window(i, mo, stride), _window(j, no, stride)
                patch = xp[:, rows_i, cols_j, :].reshape(rows, g, kg).transpose(1, 0, 2)
                gw[:, :, :, i, j] = np.matmul(patch.transpose(0, 2, 1), gy).transpose(0, 2, 1)
                gpatch = np.matmul(gy, w[:, :, :, i, j])
                gxp[:, rows_i, cols_j, :] += gpatch.transpose(1, 0, 2).reshape(b, mo, no, c)
        gx = gxp[:, ph : ph + m, pw : pw + n, :]
        return gx, gw.reshape(op.weights.shape)

    return record("conv2d", (x, op.weights), Tensor(y), backward)


def batch_norm(x: Tensor, state: BatchNormState, mode: str = "train") -> Tensor:
    """Per-channel normalization over every axis but the last."""
    _check_mode(mode)
    data = x.data
    if data.shape[-1] != state.channels:
        raise ConfigurationError(
            f"batch norm '{state.name}' has {state.channels} channels, input has {data.shape[-1]}"
        )
    axes = tuple(range(data.ndim - 1))
    count = data.size // state.channels
    gamma = state.gamma.data
    beta = state.beta.data

    if mode == "train":
        mean = data.mean(axis=axes)
        var = data.var(axis=axes)
        unbiased = var * count / (count - 1) if count > 1 else var
        mom = state.momentum
        state.running_mean[...] = (1.0 - mom) * state.running_mean + mom * mean
        state.running_var[...] = (1.0 - mom) * state.running_var + mom * unbiased
    else:
        mean = state.running_mean.copy()
        var = state.running_var.copy()

    inv = 1.0 / np.sqrt(var + state.eps)
    xhat = (data - mean) * inv
    y = gamma * xhat + beta

    def backward(grad: np.ndarray):
        ggamma = (grad * xhat).sum(axis=axes)
        gbeta = grad.sum(axis=axes)
        gxhat = grad * gamma
        if mode == "train":
            gx = (inv / count) * (
                count * gxhat - gxhat.sum(axis=axes) - xhat * (gxhat * xhat).sum(axis=axes)
            )
        else:
            gx = gxhat * inv
        return gx, ggamma, gbeta

    return record("batch_norm", (x, state.gamma, state.beta), Tensor(y), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    y = np.where(mask, x.data, 0).astype(x.dtype, copy=False)
    return record("relu", (x,), Tensor(y), lambda grad: (grad * mask,))


def identity(x: Tensor) -> Tensor:
    return x


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ConfigurationError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("add", a, b)
    return record("add", (a, b), Tensor(a.data + b.data), lambda grad: (grad, grad))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("sub", a, b)
    return record("sub", (a, b), Tensor(a.data - b.data), lambda grad: (grad, -grad))


def global_avg_pool(x: Tensor) -> Tensor:
    """Spatial mean per channel: ``(b, m, n, c) -> (b, c)``."""
    if x.ndim != 4:
        raise ConfigurationError(f"global_avg_pool expects (b, m, n, c), got {x.shape}")
    b, m, n, c = x.shape
    y = x.data.mean(axis=(1, 2))

    def backward(grad: np.ndarray):
        return (np.broadcast_to(grad[:, None, None, :] / (m * n), x.shape).copy(),)

    return record("global_avg_pool", (x,), Tensor(y), backward)


def linear_head(x: Tensor, weights: Parameter, bias: Parameter) -> Tensor:
    """Affine map ``(b, c) -> (b, classes)`` with weights of shape ``(c, classes)``."""
    if x.ndim != 2 or x.shape[1] != weights.shape[0]:
        raise ConfigurationError(
            f"linear_head: input {x.shape} does not match weights {weights.shape}"
        )
    if bias.shape != (weights.shape[1],):
        raise ConfigurationError(f"linear_head: bias {bias.shape} vs weights {weights.shape}")
    y = x.data @ weights.data + bias.data

    def backward(grad: np.ndarray):
        return grad @ weights.data.T, x.data.T @ grad, grad.sum(axis=0)

    return record("linear_head", (x, weights, bias), Tensor(y), backward)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under ``softmax(logits)``."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ConfigurationError(
            f"cross entropy: logits {logits.shape} do not match labels {labels.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ConfigurationError(f"labels must lie in [0, {logits.shape[1]})")
    batch = logits.shape[0]
    logp = log_softmax(logits.data)
    rows = np.arange(batch)
    loss = -logp[rows, labels].mean()

    def backward(grad: np.ndarray):
        probs = np.exp(logp)
        probs[rows, labels] -= 1.0
        return (probs * (grad.reshape(()) / batch),)

    return record(
        "softmax_cross_entropy", (logits,), Tensor(np.asarray(loss, dtype=logits.dtype)), backward
    )


def accuracy(logits: Tensor, labels: np.ndarray) -> Tuple[int, int]:
    """Number of correct top-1 predictions and the batch size."""
    predicted = np.argmax(logits.data, axis=1)
    return int((predicted == np.asarray(labels)).sum()), int(predicted.size)
