"""Comparison methods: historical average, linear regressions and an MLP under the shared loss."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .data.grid import DemandGrid
from .data.normalize import Normalizer
from .data.samples import SampleSet
from .errors import ConfigError, InputError
from .model import Forecaster
from .nn import Dense, Tensor

LINEAR_KINDS = ("olsr", "ridge", "lasso")


# -- historical average -----------------------------------------------------

def ha_period(grid: DemandGrid, by_day_of_week: bool = True) -> int:
    per_day = grid.spec.intervals_per_day
    return 7 * per_day if by_day_of_week else per_day


def ha_predict(history: DemandGrid, region: int, t_next: int, by_day_of_week: bool = True) -> tuple[float, bool]:
    """Mean demand of ``region`` over earlier intervals in the same slot as ``t_next``.

    The slot is (time of day, day of week), or time of day alone when
    ``by_day_of_week`` is false.  Only intervals before ``t_next`` count.
    Returns ``(value, fallback)``; with no earlier interval in the slot the
    region's mean over all earlier intervals is used and ``fallback`` is true.
    """
    n_t = history.n_intervals
    if not 0 <= region < history.spec.n_regions:
        raise InputError(f"region {region} outside the grid")
    if not 0 <= t_next <= n_t:
        raise InputError(f"interval {t_next} outside [0, {n_t}]")
    series = history.series[:, region].astype(np.float64)
    period = ha_period(history, by_day_of_week)
    past = series[t_next - period::-period] if t_next >= period else series[:0]
    if past.size:
        return float(past.mean()), False
    if t_next == 0:
        return 0.0, True
    return float(series[:t_next].mean()), True


def ha_batch(grid: DemandGrid, regions, t_next, by_day_of_week: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`ha_predict` for many ``(region, t_next)`` pairs."""
    regions = np.asarray(regions, dtype=np.int64)
    t_next = np.asarray(t_next, dtype=np.int64)
    series = grid.series.astype(np.float64)
    n_t = series.shape[0]
    if np.any(t_next < 0) or np.any(t_next > n_t):
        raise InputError("target interval outside the grid")
    period = ha_period(grid, by_day_of_week)
    # slot_sum[t] = series[t] + series[t - P] + ...
    slot_sum = series.copy()
    for t in range(period, n_t):
        slot_sum[t] += slot_sum[t - period]
    count = t_next // period
    has = count > 0
    out = np.zeros(len(regions))
    prev = np.where(has, t_next - period, 0)
    out[has] = slot_sum[prev[has], regions[has]] / count[has]
    # fallback: mean over every earlier interval
    prefix = np.vstack([np.zeros((1, series.shape[1])), np.cumsum(series, axis=0)])
    fb = ~has & (t_next > 0)
    out[fb] = prefix[t_next[fb], regions[fb]] / t_next[fb]
    return out, ~has


class HistoricalAverage:
    """HA baseline over a demand grid; predicts raw (denormalized) demand."""

    kind = "ha"

    def __init__(self, grid: DemandGrid, by_day_of_week: bool = True):
        self.grid = grid
        self.by_day_of_week = by_day_of_week
        self.fallbacks = 0

    def predict_samples(self, samples: SampleSet, normalizer: Normalizer | None = None) -> np.ndarray:
        pred, fallback = ha_batch(self.grid, samples.region, samples.t + 1, self.by_day_of_week)
        self.fallbacks = int(fallback.sum())
        return pred


# -- feature-based baselines ------------------------------------------------

def flat_features(samples: SampleSet, idx=None) -> np.ndarray:
    """Last-step context vector plus the ``h`` recent normalized demands of the region."""
    ctx = samples.contexts(idx)[:, -1, :]
    return np.concatenate([ctx, samples.recent_demand(idx)], axis=1)


@dataclass
class BaselineConfig:
    kind: str = "olsr"
    n_features: int = 67
    reg_weight: float = 0.0
    layers: list[int] = field(default_factory=lambda: [128, 128, 64, 64])
    gamma: float = 1.0
    lr: float = 1e-3
    batch_size: int = 64
    max_epoch: int = 100
    early_stop: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.kind not in LINEAR_KINDS + ("mlp",):
            raise ConfigError(f"unknown baseline kind {self.kind!r}")
        if self.reg_weight < 0:
            raise ConfigError("reg_weight must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown baseline config keys: {sorted(unknown)}")
        return cls(**d)


class LinearBaseline(Forecaster):
    """``y = w . x + b`` (no squashing) with an optional l2 / l1 weight penalty."""

    kind = "linear"

    def __init__(self, config: BaselineConfig):
        super().__init__()
        if config.kind not in LINEAR_KINDS:
            raise ConfigError(f"{config.kind!r} is not a linear baseline")
        self.config = config
        init, _ = np.random.SeedSequence(config.seed).spawn(2)
        self.fc = Dense(config.n_features, 1, np.random.default_rng(init))

    def forward_batch(self, samples: SampleSet, idx) -> Tensor:
        return self.fc(Tensor(flat_features(samples, np.asarray(idx)))).reshape(-1)

    def penalty(self) -> Tensor | None:
        w = self.fc.weight
        if self.config.kind == "ridge":
            return (w * w).sum() * self.config.reg_weight
        if self.config.kind == "lasso":
            return w.abs().sum() * self.config.reg_weight
        return None

    def config_dict(self) -> dict:
        return self.config.to_dict()


class MLPBaseline(Forecaster):
    """Fully connected relu stack with a sigmoid output unit."""

    kind = "mlp"

    def __init__(self, config: BaselineConfig):
        super().__init__()
        self.config = config
        init, _ = np.random.SeedSequence(config.seed).spawn(2)
        rng = np.random.default_rng(init)
        widths = [config.n_features] + list(config.layers)
        self.n_hidden = len(config.layers)
        for k in range(self.n_hidden):
            setattr(self, f"fc{k}", Dense(widths[k], widths[k + 1], rng))
        self.out = Dense(widths[-1], 1, rng)

    def forward_batch(self, samples: SampleSet, idx) -> Tensor:
        x = Tensor(flat_features(samples, np.asarray(idx)))
        for k in range(self.n_hidden):
            x = getattr(self, f"fc{k}")(x).relu()
        return self.out(x).sigmoid().reshape(-1)

    def config_dict(self) -> dict:
        return self.config.to_dict()


def _n_features(samples: SampleSet) -> int:
    return samples.context.shape[-1] + samples.h


def fit_linear_baseline(train_set: SampleSet, kind: str = "olsr", reg_weight: float = 0.0,
                        val_set: SampleSet | None = None, **overrides):
    """Train a linear baseline with the shared loop; returns ``(model, report)``."""
    from .training import settings_from, train
    config = BaselineConfig(kind=kind, n_features=_n_features(train_set), reg_weight=reg_weight,
                            **overrides)
    model = LinearBaseline(config)
    report = train(model, train_set, val_set, settings_from(model))
    return model, report


def fit_mlp_baseline(train_set: SampleSet, layers=(128, 128, 64, 64),
                     val_set: SampleSet | None = None, **overrides):
    from .training import settings_from, train
    config = BaselineConfig(kind="mlp", n_features=_n_features(train_set), layers=list(layers),
                            **overrides)
    model = MLPBaseline(config)
    report = train(model, train_set, val_set, settings_from(model))
    return model, report
