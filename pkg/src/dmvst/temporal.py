"""Temporal view: a single-layer LSTM over the per-step joint vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SequenceError, ShapeError
from .nn import Module, Tensor, as_tensor, concat, glorot_uniform

GATES = ("i", "f", "o", "g")


def concat_step_input(spatial, context) -> Tensor:
    """``g = s_hat (+) e`` along the last axis."""
    spatial, context = as_tensor(spatial), as_tensor(context)
    if context.shape[-1] == 0:
        return spatial
    return concat([spatial, context], axis=-1)


@dataclass
class LstmState:
    h: Tensor
    c: Tensor


class LSTM(Module):
    """Gate parameters ``W_a (hidden x n_in)``, ``U_a (hidden x hidden)``, ``b_a`` for a in i, f, o, g."""

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.n_in = n_in
        self.hidden = hidden
        for a in GATES:
            setattr(self, f"W_{a}", Tensor(glorot_uniform(rng, (hidden, n_in), n_in, hidden), requires_grad=True))
            setattr(self, f"U_{a}", Tensor(glorot_uniform(rng, (hidden, hidden), hidden, hidden), requires_grad=True))
            setattr(self, f"b_{a}", Tensor(np.zeros(hidden), requires_grad=True))

    def zero_state(self, batch: int | None = None) -> LstmState:
        shape = (self.hidden,) if batch is None else (batch, self.hidden)
        return LstmState(Tensor(np.zeros(shape)), Tensor(np.zeros(shape)))

    def forward(self, sequence, steps: int | None = None) -> Tensor:
        return lstm_sequence(sequence, self, steps)


def _gate(g: Tensor, h: Tensor, params: LSTM, a: str) -> Tensor:
    return g @ getattr(params, f"W_{a}").T + h @ getattr(params, f"U_{a}").T + getattr(params, f"b_{a}")


def lstm_step(g, state: LstmState, params: LSTM) -> LstmState:
    g = as_tensor(g)
    if g.shape[-1] != params.n_in:
        raise ShapeError(f"LSTM input width {g.shape[-1]} != {params.n_in}")
    if state.h.shape[-1] != params.hidden or state.c.shape != state.h.shape:
        raise ShapeError("LSTM state does not match the hidden size")
    i = _gate(g, state.h, params, "i").sigmoid()
    f = _gate(g, state.h, params, "f").sigmoid()
    o = _gate(g, state.h, params, "o").sigmoid()
    cand = _gate(g, state.h, params, "g").tanh()
    c = f * state.c + i * cand
    return LstmState(o * c.tanh(), c)


def lstm_sequence(sequence, params: LSTM, steps: int | None = None) -> Tensor:
    """Run from a zero state over ``sequence`` and return the final hidden vector.

    ``sequence`` is a list of step inputs, or a tensor shaped ``(h, n_in)`` or
    ``(B, h, n_in)``.  When ``steps`` is given the length must match it.
    """
    if isinstance(sequence, (list, tuple)):
        xs = [as_tensor(s) for s in sequence]
    else:
        seq = as_tensor(sequence)
        if seq.ndim == 2:
            xs = [seq[k] for k in range(seq.shape[0])]
        elif seq.ndim == 3:
            xs = [seq[:, k, :] for k in range(seq.shape[1])]
        else:
            raise ShapeError(f"sequence must be (h, n) or (B, h, n), got {seq.shape}")
    if not xs:
        raise SequenceError("empty sequence")
    if steps is not None and len(xs) != steps:
        raise SequenceError(f"expected a sequence of length {steps}, got {len(xs)}")
    batch = xs[0].shape[0] if xs[0].ndim == 2 else None
    state = params.zero_state(batch)
    for x in xs:
        state = lstm_step(x, state, params)
    return state.h
