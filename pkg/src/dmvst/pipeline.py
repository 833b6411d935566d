"""Grid -> normalizer, context, semantic graph, embeddings, and train/val/test sample sets."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data.context import ContextFeatures, build_context
from .data.grid import DemandGrid
from .data.normalize import Normalizer, fit_normalizer
from .data.samples import SampleSet, build_samples, split_train_val
from .errors import InsufficientDataError
from .semantic import SemanticGraph, build_graph, line_embed, weekly_pattern

log = logging.getLogger(__name__)


@dataclass
class Dataset:
    grid: DemandGrid
    train_intervals: int
    normalizer: Normalizer
    context: ContextFeatures
    embeddings: np.ndarray
    train: SampleSet
    val: SampleSet
    test: SampleSet
    graph: SemanticGraph | None = None


def semantic_embeddings(grid: DemandGrid, train_intervals: int, normalizer: Normalizer,
                        dim: int = 32, alpha: float = 1.0, seed: int = 0,
                        line_samples: int = 1_000_000, dtw_window: int | None = None):
    """Weekly patterns of the training slice (normalized) -> DTW graph -> LINE table."""
    patterns = normalizer.normalize(weekly_pattern(grid.slice(0, train_intervals)))
    graph = build_graph(patterns, alpha=alpha, window=dtw_window)
    return graph, line_embed(graph, dim=dim, seed=seed, samples=line_samples)


def prepare(grid: DemandGrid, train_days: int, seq_len: int = 8, patch_size: int = 9,
            threshold: float = 10, embed_dim: int = 32, alpha: float = 1.0, seed: int = 0,
            line_samples: int = 1_000_000, dtw_window: int | None = None,
            embeddings: np.ndarray | None = None, holidays=None, weather=None,
            weather_width: int | None = None) -> Dataset:
    train_intervals = train_days * grid.spec.intervals_per_day
    if train_intervals >= grid.n_intervals:
        raise InsufficientDataError(f"{train_days} training days leave no test intervals")
    normalizer = fit_normalizer(grid.counts[:train_intervals])
    context = build_context(grid, holidays=holidays, weather=weather, weather_width=weather_width,
                            train_intervals=train_intervals)
    graph = None
    if embeddings is None:
        graph, embeddings = semantic_embeddings(grid, train_intervals, normalizer, embed_dim, alpha,
                                                seed, line_samples, dtw_window)
    common = dict(h=seq_len, normalizer=normalizer, threshold=threshold, patch_size=patch_size)
    fit = build_samples(grid, context, embeddings, target_range=(0, train_intervals), **common)
    test = build_samples(grid, context, embeddings, target_range=(train_intervals, grid.n_intervals), **common)
    train, val = split_train_val(fit)
    log.info("samples: train %d, val %d, test %d", len(train), len(val), len(test))
    return Dataset(grid, train_intervals, normalizer, context, embeddings, train, val, test, graph)
