"""Parameter containers: a small Module base and the dense/conv/batchnorm layers."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from .functional import BatchNormState, batchnorm, conv2d_same, dense, glorot_uniform
from .tensor import Tensor


class Module:
    """Registers trainable tensors and sub-modules in assignment order.

    Assignment order fixes the flat parameter enumeration, which in turn fixes
    the optimizer state layout and the checkpoint layout.
    """

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, key, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[key] = value
        elif isinstance(value, Module):
            self._children[key] = value
        object.__setattr__(self, key, value)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, p in self._params.items():
            yield prefix + key, p
        for key, child in self._children.items():
            yield from child.named_parameters(prefix + key + ".")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for key, child in self._children.items():
            yield from child.named_buffers(prefix + key + ".")

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        head, _, rest = name.partition(".")
        self._children[head].set_buffer(rest, value)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True) -> "Module":
        object.__setattr__(self, "training", mode)
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        super().__init__()
        self.weight = Tensor(glorot_uniform(rng, (n_out, n_in), n_in, n_out), requires_grad=True)
        self.bias = Tensor(np.zeros(n_out), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        return dense(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator, size: int = 3):
        super().__init__()
        fan_in, fan_out = size * size * c_in, size * size * c_out
        self.kernels = Tensor(glorot_uniform(rng, (size, size, c_in, c_out), fan_in, fan_out),
                              requires_grad=True)
        self.bias = Tensor(np.zeros(c_out), requires_grad=True)

    def forward(self, x: Tensor) -> Tensor:
        return conv2d_same(x, self.kernels, self.bias)


class BatchNorm(Module):
    def __init__(self, channels: int, momentum: float = 0.99, eps: float = 1e-6):
        super().__init__()
        self.state = BatchNormState.create(channels, momentum=momentum, eps=eps)
        self.scale = self.state.scale
        self.shift = self.state.shift

    def train(self, mode: bool = True) -> "BatchNorm":
        super().train(mode)
        self.state.training = mode
        return self

    def forward(self, x: Tensor) -> Tensor:
        return batchnorm(x, self.state)

    def named_buffers(self, prefix: str = ""):
        yield prefix + "running_mean", self.state.running_mean
        yield prefix + "running_var", self.state.running_var

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        if name not in ("running_mean", "running_var"):
            raise KeyError(name)
        setattr(self.state, name, np.array(value, dtype=np.float64))
