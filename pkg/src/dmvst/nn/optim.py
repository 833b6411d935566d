"""Adam with bias-corrected moment estimates."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import OptimizerError, ShapeError
from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              names: Sequence[str] | None = None) -> list[np.ndarray]:
    """Return updated copies of ``params``; mutates ``state`` in place.

    All gradients are validated before anything is touched, so a failing call
    leaves both the parameters and the state unchanged.
    """
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} params but {len(grads)} grads")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p) for p in params]
        state.second_moment = [np.zeros_like(p) for p in params]
    if len(state.first_moment) != len(params):
        raise ShapeError("optimizer state was built for a different parameter list")
    for k, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.shape or state.first_moment[k].shape != p.shape:
            raise ShapeError(f"parameter {k}: shape {p.shape}, grad {g.shape}")
        if not np.all(np.isfinite(g)):
            label = names[k] if names is not None else f"#{k}"
            raise OptimizerError(f"non-finite gradient for parameter {label}")

    state.step_count += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.step_count
    bc2 = 1.0 - b2**state.step_count
    updated = []
    for k, (p, g) in enumerate(zip(params, grads)):
        m = b1 * state.first_moment[k] + (1.0 - b1) * g
        v = b2 * state.second_moment[k] + (1.0 - b2) * (g * g)
        state.first_moment[k] = m
        state.second_moment[k] = v
        updated.append(p - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon))
    return updated


class Adam:
    """Applies :func:`adam_step` to a fixed list of tracked tensors."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, epsilon: float = 1e-8, names: Sequence[str] | None = None):
        self.params = list(params)
        self.names = list(names) if names is not None else [p.name or f"#{i}" for i, p in enumerate(self.params)]
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)

    def step(self) -> None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        new = adam_step([p.data for p in self.params], grads, self.state, self.names)
        for p, value in zip(self.params, new):
            p.data = value

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
