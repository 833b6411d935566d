"""Layer primitives with fused forward/backward rules."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DegenerateBatchError, ShapeError
from .tensor import DTYPE, Tensor, as_tensor, matmul


def conv2d_same(x: Tensor, kernels: Tensor, bias: Tensor) -> Tensor:
    """Stride-1 cross-correlation with zero "same" padding.

    ``x`` is channels-last, ``(H, W, C_in)`` or ``(B, H, W, C_in)``; ``kernels`` is
    ``(k, k, C_in, C_out)`` with odd ``k``; output keeps the input's spatial shape.
    """
    x, kernels, bias = as_tensor(x), as_tensor(kernels), as_tensor(bias)
    inp, w = x.data, kernels.data
    unbatched = inp.ndim == 3
    if unbatched:
        inp = inp[None]
    if inp.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d_same expects (B,H,W,C) input and (k,k,Cin,Cout) kernels, "
                         f"got {x.shape} and {kernels.shape}")
    k, k2, c_in, c_out = w.shape
    if k != k2 or k % 2 == 0:
        raise ShapeError(f"kernel must be square with odd side, got {k}x{k2}")
    if inp.shape[-1] != c_in:
        raise ShapeError(f"input has {inp.shape[-1]} channels, kernels expect {c_in}")
    if bias.shape != (c_out,):
        raise ShapeError(f"bias shape {bias.shape} != ({c_out},)")

    b, hgt, wid, _ = inp.shape
    p = k // 2
    padded = np.pad(inp, ((0, 0), (p, p), (p, p), (0, 0)))
    # (B, H, W, C, ky, kx) -> (B, H, W, ky, kx, C)
    win = sliding_window_view(padded, (k, k), axis=(1, 2)).transpose(0, 1, 2, 4, 5, 3)
    cols = win.reshape(b * hgt * wid, k * k * c_in)
    wmat = w.reshape(k * k * c_in, c_out)
    out = (cols @ wmat + bias.data).reshape(b, hgt, wid, c_out)
    if unbatched:
        out = out[0]

    def backward(g):
        g2 = g.reshape(b * hgt * wid, c_out)
        gw = (cols.T @ g2).reshape(w.shape)
        gb = g2.sum(axis=0)
        gcols = (g2 @ wmat.T).reshape(b, hgt, wid, k, k, c_in)
        gpad = np.zeros_like(padded)
        for ky in range(k):
            for kx in range(k):
                gpad[:, ky:ky + hgt, kx:kx + wid, :] += gcols[:, :, :, ky, kx, :]
        gx = gpad[:, p:p + hgt, p:p + wid, :]
        if unbatched:
            gx = gx[0]
        return gx, gw, gb

    return Tensor._result(out, (x, kernels, bias), backward)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """``out_j = sum_k weight[j, k] * x[k] + bias[j]``; leading batch axes allowed."""
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise ShapeError(f"dense: input width {x.shape[-1:]} vs weight {weight.shape}")
    if bias.shape != (weight.shape[0],):
        raise ShapeError(f"dense: bias {bias.shape} vs weight {weight.shape}")
    return matmul(x, weight.T) + bias


def activation(x: Tensor, kind: str) -> Tensor:
    x = as_tensor(x)
    if kind == "relu":
        return x.relu()
    if kind == "sigmoid":
        return x.sigmoid()
    if kind == "tanh":
        return x.tanh()
    raise ValueError(f"unknown activation {kind!r}")


@dataclass
class BatchNormState:
    """Per-channel affine parameters plus running statistics.

    ``momentum`` weights the old running value (Keras convention):
    ``running = momentum * running + (1 - momentum) * batch_stat``.
    """

    scale: Tensor
    shift: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.99
    eps: float = 1e-6
    training: bool = True

    @classmethod
    def create(cls, channels: int, momentum: float = 0.99, eps: float = 1e-6,
               name: str = "bn") -> "BatchNormState":
        return cls(
            scale=Tensor(np.ones(channels), requires_grad=True, name=f"{name}.scale"),
            shift=Tensor(np.zeros(channels), requires_grad=True, name=f"{name}.shift"),
            running_mean=np.zeros(channels, dtype=DTYPE),
            running_var=np.ones(channels, dtype=DTYPE),
            momentum=momentum,
            eps=eps,
        )


def batchnorm(x: Tensor, state: BatchNormState) -> Tensor:
    """Normalise the last (channel) axis over every other axis."""
    x = as_tensor(x)
    data = x.data
    channels = state.scale.shape[0]
    if data.shape[-1] != channels:
        raise ShapeError(f"batchnorm: {data.shape[-1]} channels, state has {channels}")
    gamma, beta = state.scale.data, state.shift.data
    axes = tuple(range(data.ndim - 1))

    if not state.training:
        inv = 1.0 / np.sqrt(state.running_var + state.eps)
        xhat = (data - state.running_mean) * inv
        out = gamma * xhat + beta

        def backward_eval(g):
            return (g * gamma * inv, (g * xhat).sum(axis=axes), g.sum(axis=axes))

        return Tensor._result(out, (x, state.scale, state.shift), backward_eval)

    if data.ndim < 2 or data.shape[0] < 2:
        raise DegenerateBatchError(f"training-mode batchnorm needs batch >= 2, got shape {data.shape}")
    m = data.size // channels
    mean = data.mean(axis=axes)
    centered = data - mean
    var = (centered * centered).mean(axis=axes)
    inv = 1.0 / np.sqrt(var + state.eps)
    xhat = centered * inv
    out = gamma * xhat + beta

    mom = state.momentum
    state.running_mean = mom * state.running_mean + (1.0 - mom) * mean
    state.running_var = mom * state.running_var + (1.0 - mom) * var * (m / max(m - 1, 1))

    def backward(g):
        dxhat = g * gamma
        sum_d = dxhat.sum(axis=axes)
        sum_dx = (dxhat * xhat).sum(axis=axes)
        gx = (inv / m) * (m * dxhat - sum_d - xhat * sum_dx)
        return gx, (g * xhat).sum(axis=axes), g.sum(axis=axes)

    return Tensor._result(out, (x, state.scale, state.shift), backward)


def glorot_uniform(rng: np.random.Generator, shape: tuple, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)
