"""Semantic view: DTW similarity graph over weekly demand patterns, LINE embedding, projection."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .data.grid import DemandGrid
from .errors import GraphError, InputError, InsufficientDataError, ShapeError
from .nn import Dense, Module, Tensor, as_tensor, dense


def weekly_pattern(grid: DemandGrid) -> np.ndarray:
    """``(N, P)`` mean demand per weekly slot, ``P = 7 * intervals_per_day``.

    Slot ``p`` averages every interval whose index is congruent to ``p`` mod ``P``
    (indices counted from the start of ``grid``).
    """
    period = 7 * grid.spec.intervals_per_day
    n_t = grid.n_intervals
    if n_t < period:
        raise InsufficientDataError(f"need at least one full week ({period} intervals), got {n_t}")
    series = grid.series.astype(np.float64)
    slot = np.arange(n_t) % period
    sums = np.zeros((period, series.shape[1]))
    np.add.at(sums, slot, series)
    counts = np.bincount(slot, minlength=period)
    return (sums / counts[:, None]).T


def dtw_batch(x: np.ndarray, y: np.ndarray, window: int | None = None) -> np.ndarray:
    """DTW distances for row pairs ``(x[k], y[k])``; local cost ``|a - b|``.

    Steps are diagonal, up and left with no slope constraint.  ``window``
    optionally restricts cells to ``|i - j| <= window`` (Sakoe-Chiba band).
    The recursion sweeps anti-diagonals, vectorised over pairs and cells.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if x.shape[0] != y.shape[0]:
        raise ShapeError("x and y need the same number of rows")
    m, p = x.shape
    q = y.shape[1]
    if p == 0 or q == 0:
        raise InputError("DTW of an empty series")
    if window is not None and abs(p - q) > window:
        return np.full(m, np.inf)
    # column i+1 holds row i of the cost lattice; column 0 is a permanent +inf guard
    prev2 = np.full((m, p + 1), np.inf)
    prev2[:, 0] = 0.0
    prev1 = np.full((m, p + 1), np.inf)
    for k in range(p + q - 1):
        lo, hi = max(0, k - q + 1), min(k, p - 1)
        cost = np.abs(x[:, lo:hi + 1] - y[:, k - hi:k - lo + 1][:, ::-1])
        if window is not None:
            i = np.arange(lo, hi + 1)
            cost = np.where(np.abs(2 * i - k) <= window, cost, np.inf)
        best = np.minimum(np.minimum(prev2[:, lo:hi + 1], prev1[:, lo:hi + 1]), prev1[:, lo + 1:hi + 2])
        cur = np.full((m, p + 1), np.inf)
        cur[:, lo + 1:hi + 2] = cost + best
        prev2, prev1 = prev1, cur
    return prev1[:, p]


def dtw_distance(x, y, window: int | None = None) -> float:
    return float(dtw_batch(np.asarray(x, dtype=np.float64)[None], np.asarray(y, dtype=np.float64)[None], window)[0])


def dtw_matrix(patterns: np.ndarray, window: int | None = None, chunk: int = 2048) -> np.ndarray:
    patterns = np.asarray(patterns, dtype=np.float64)
    n = patterns.shape[0]
    pairs = np.array(list(combinations(range(n), 2)), dtype=np.int64).reshape(-1, 2)
    out = np.zeros((n, n))
    for start in range(0, len(pairs), chunk):
        block = pairs[start:start + chunk]
        d = dtw_batch(patterns[block[:, 0]], patterns[block[:, 1]], window)
        out[block[:, 0], block[:, 1]] = d
        out[block[:, 1], block[:, 0]] = d
    return out


@dataclass
class SemanticGraph:
    weights: np.ndarray    # (N, N) symmetric, unit diagonal
    distances: np.ndarray  # (N, N) DTW
    alpha: float = 1.0

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]


def build_graph(patterns: np.ndarray, alpha: float = 1.0, window: int | None = None) -> SemanticGraph:
    """Fully connected graph with ``w_ij = exp(-alpha * DTW(i, j))``."""
    patterns = np.asarray(patterns, dtype=np.float64)
    if patterns.ndim != 2:
        raise ShapeError("patterns must be (N, P)")
    dist = dtw_matrix(patterns, window)
    return graph_from_distances(dist, alpha)


def graph_from_distances(dist: np.ndarray, alpha: float = 1.0) -> SemanticGraph:
    dist = np.asarray(dist, dtype=np.float64)
    weights = np.exp(-alpha * dist)
    np.fill_diagonal(weights, 1.0)
    return SemanticGraph(weights, dist, alpha)


def line_embed(graph: SemanticGraph | np.ndarray, dim: int = 32, seed: int = 0,
               samples: int = 1_000_000, negatives: int = 5, lr: float = 0.025,
               batch: int = 64) -> np.ndarray:
    """First-order LINE: ``(N, dim)`` embeddings from weighted edge sampling.

    Edges are drawn with probability proportional to their weight and in a
    random direction; each positive edge is paired with ``negatives`` nodes
    drawn from the degree^0.75 distribution.  Plain SGD on mini-batches with a
    linearly decaying learning rate, fully determined by ``seed``.
    """
    weights = graph.weights if isinstance(graph, SemanticGraph) else np.asarray(graph, dtype=np.float64)
    n = weights.shape[0]
    if weights.shape != (n, n):
        raise GraphError("weight matrix must be square")
    iu, ju = np.triu_indices(n, k=1)
    w = weights[iu, ju]
    if n < 2:
        raise GraphError("graph needs at least two nodes")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise GraphError("LINE needs strictly positive, finite edge weights")

    rng = np.random.default_rng(seed)
    edge_cdf = np.cumsum(w / w.sum())
    degree = weights.sum(axis=1) - np.diag(weights)
    noise = degree**0.75
    noise_cdf = np.cumsum(noise / noise.sum())
    emb = (rng.random((n, dim)) - 0.5) / dim

    steps = max(1, samples // batch)
    for step in range(steps):
        rate = lr * max(1e-4, 1.0 - step / steps)
        e = np.minimum(np.searchsorted(edge_cdf, rng.random(batch), side="right"), len(w) - 1)
        flip = rng.random(batch) < 0.5
        src = np.where(flip, ju[e], iu[e])
        dst = np.where(flip, iu[e], ju[e])
        neg = np.minimum(np.searchsorted(noise_cdf, rng.random((batch, negatives)), side="right"), n - 1)

        targets = np.concatenate([dst[:, None], neg], axis=1)            # (b, 1+K)
        labels = np.zeros((batch, 1 + negatives))
        labels[:, 0] = 1.0
        u = emb[src]                                                     # (b, dim)
        v = emb[targets]                                                 # (b, 1+K, dim)
        score = np.einsum("bd,bkd->bk", u, v)
        coeff = labels - 1.0 / (1.0 + np.exp(-score))                   # d log-lik / d score
        grad_u = np.einsum("bk,bkd->bd", coeff, v)
        grad_v = coeff[..., None] * u[:, None, :]
        np.add.at(emb, src, rate * grad_u)
        np.add.at(emb, targets.reshape(-1), rate * grad_v.reshape(-1, dim))
    return emb


class SemanticProjection(Module):
    """``m_hat = relu(W_fe m + b_fe)``."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        super().__init__()
        self.fc = Dense(in_dim, out_dim, rng)

    def forward(self, m) -> Tensor:
        return self.fc(m).relu()


def semantic_fc(m, weight, bias) -> Tensor:
    return dense(as_tensor(m), as_tensor(weight), as_tensor(bias)).relu()
