"""Training/prediction instances: h patches, h context rows, a semantic vector, a target."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientHistoryError, ShapeError, SplitError
from .context import ContextFeatures
from .grid import DemandGrid
from .normalize import Normalizer


@dataclass
class Sample:
    region: int
    t: int
    patches: np.ndarray   # (h, S, S, 1), normalized demand for intervals t-h+1..t
    contexts: np.ndarray  # (h, r)
    semantic: np.ndarray  # (embedding_dim,)
    target: float         # normalized y_{t+1}
    target_raw: float


class SampleSet:
    """Struct-of-arrays collection of samples sharing one grid, context and embedding table.

    Patches are cut from a zero-padded normalized grid on demand, so a set of
    ``n`` samples costs ``O(n)`` memory regardless of ``h`` and ``S``.
    """

    def __init__(self, padded: np.ndarray, context: np.ndarray, embeddings: np.ndarray,
                 cells: np.ndarray, region: np.ndarray, t: np.ndarray, target: np.ndarray,
                 target_raw: np.ndarray, h: int, patch_size: int, start_time: int = 0,
                 interval_seconds: int = 1800):
        self.padded = padded
        self.context = context
        self.embeddings = embeddings
        self.cells = cells
        self.region = np.asarray(region, dtype=np.int64)
        self.t = np.asarray(t, dtype=np.int64)
        self.target = np.asarray(target, dtype=np.float64)
        self.target_raw = np.asarray(target_raw, dtype=np.float64)
        self.h = h
        self.patch_size = patch_size
        self.start_time = start_time
        self.interval_seconds = interval_seconds

    def __len__(self) -> int:
        return len(self.t)

    def subset(self, idx) -> "SampleSet":
        idx = np.asarray(idx)
        return SampleSet(self.padded, self.context, self.embeddings, self.cells, self.region[idx],
                         self.t[idx], self.target[idx], self.target_raw[idx], self.h,
                         self.patch_size, self.start_time, self.interval_seconds)

    def patches(self, idx=None) -> np.ndarray:
        """``(b, h, S, S, 1)`` patches for the selected samples."""
        idx = slice(None) if idx is None else idx
        t, reg = self.t[idx], self.region[idx]
        s = self.patch_size
        steps = t[:, None] - np.arange(self.h - 1, -1, -1)[None, :]
        xy = self.cells[reg]
        off = np.arange(s)
        rows = xy[:, 0, None] + off[None, :]
        cols = xy[:, 1, None] + off[None, :]
        out = self.padded[steps[:, :, None, None], rows[:, None, :, None], cols[:, None, None, :]]
        return out[..., None]

    def contexts(self, idx=None) -> np.ndarray:
        idx = slice(None) if idx is None else idx
        t, reg = self.t[idx], self.region[idx]
        steps = t[:, None] - np.arange(self.h - 1, -1, -1)[None, :]
        return self.context[steps, reg[:, None]]

    def semantic(self, idx=None) -> np.ndarray:
        idx = slice(None) if idx is None else idx
        return self.embeddings[self.region[idx]]

    def recent_demand(self, idx=None) -> np.ndarray:
        """``(b, h)`` normalized demand of the target region itself (patch centers)."""
        idx = slice(None) if idx is None else idx
        t, reg = self.t[idx], self.region[idx]
        steps = t[:, None] - np.arange(self.h - 1, -1, -1)[None, :]
        c = (self.patch_size - 1) // 2
        xy = self.cells[reg]
        return self.padded[steps, (xy[:, 0] + c)[:, None], (xy[:, 1] + c)[:, None]]

    def target_day_of_week(self) -> np.ndarray:
        start = self.start_time + (self.t + 1) * self.interval_seconds
        return (start // 86400 + 3) % 7

    def __getitem__(self, k: int) -> Sample:
        k = int(k)
        sel = np.array([k])
        return Sample(int(self.region[k]), int(self.t[k]), self.patches(sel)[0],
                      self.contexts(sel)[0], self.semantic(sel)[0], float(self.target[k]),
                      float(self.target_raw[k]))


def build_samples(grid: DemandGrid, context: ContextFeatures, embeddings: np.ndarray, h: int,
                  normalizer: Normalizer, threshold: float = 10, patch_size: int = 9,
                  target_range: tuple[int, int] | None = None) -> SampleSet:
    """One sample per region and end interval ``t`` in ``[h, T-2]`` whose raw target
    ``y_{t+1}`` is at least ``threshold``.

    ``target_range = (lo, hi)`` further keeps only targets with ``lo <= t+1 < hi``.
    Samples are ordered by ``(t, region)``.
    """
    n_t, n = grid.n_intervals, grid.spec.n_regions
    if h < 1:
        raise ShapeError("sequence length h must be >= 1")
    if h >= n_t - 1:
        raise InsufficientHistoryError(f"h={h} leaves no (history, target) pair in {n_t} intervals")
    if patch_size % 2 == 0:
        raise ShapeError("patch size must be odd")
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] != n:
        raise ShapeError(f"need one embedding row per region ({n}), got {embeddings.shape}")
    if context.values.shape[:2] != (n_t, n):
        raise ShapeError("context does not cover the grid")

    p = (patch_size - 1) // 2
    norm = normalizer.normalize(grid.counts)
    padded = np.pad(norm, ((0, 0), (p, p), (p, p)))
    cells = np.stack(np.divmod(np.arange(n), grid.spec.height), axis=1)

    t = np.arange(h, n_t - 1)
    if target_range is not None:
        lo, hi = target_range
        t = t[(t + 1 >= lo) & (t + 1 < hi)]
    series = grid.series
    tt, rr = np.meshgrid(t, np.arange(n), indexing="ij")
    tt, rr = tt.ravel(), rr.ravel()
    raw = series[tt + 1, rr].astype(np.float64)
    keep = raw >= threshold
    tt, rr, raw = tt[keep], rr[keep], raw[keep]
    return SampleSet(padded, context.values, embeddings, cells, rr, tt, normalizer.normalize(raw),
                     raw, h, patch_size, grid.start_time, grid.spec.interval_seconds)


def split_train_val(samples: SampleSet, train_fraction: float = 0.9) -> tuple[SampleSet, SampleSet]:
    """First ``train_fraction`` by time -> train, rest -> validation.

    Samples sharing the end interval of the first validation sample all go to
    validation, so no validation sample precedes a training sample.
    """
    n = len(samples)
    if n < 10:
        raise SplitError(f"need at least 10 samples to split, got {n}")
    order = np.argsort(samples.t, kind="stable")
    n_train = int(np.floor(train_fraction * n + 1e-9))
    boundary = samples.t[order[n_train]]
    train_idx = order[samples.t[order] < boundary]
    val_idx = order[samples.t[order] >= boundary]
    if len(train_idx) == 0:
        raise SplitError("every sample shares the boundary interval; nothing left to train on")
    return samples.subset(train_idx), samples.subset(val_idx)
