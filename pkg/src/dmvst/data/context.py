"""Per-(interval, region) context vectors ``e_t^i``.

Layout, in order (``layout`` records the slice of each block):

    recent_demand   1   mean raw demand over intervals t-3..t, max-min scaled
    time_of_day     1440 / interval_minutes one-hot
    day_of_week     7 one-hot, Monday = 0
    location        2   region-center (lat, lng) scaled to [0, 1] in the bounding box
    weather         configurable one-hot width (0 when no weather stream is given)
    holiday         1   flag
"""
from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientHistoryError, ShapeError
from .grid import DemandGrid
from .normalize import Normalizer, fit_normalizer

RECENT_WINDOW = 4


@dataclass
class ContextFeatures:
    values: np.ndarray  # (T, N, r)
    layout: dict[str, tuple[int, int]]
    recent_scale: Normalizer

    @property
    def width(self) -> int:
        return self.values.shape[-1]

    def row(self, t: int, region: int) -> np.ndarray:
        return self.values[t, region]

    def block(self, name: str) -> np.ndarray:
        lo, hi = self.layout[name]
        return self.values[..., lo:hi]


def recent_mean(series: np.ndarray, window: int = RECENT_WINDOW) -> np.ndarray:
    """Trailing mean over ``t-window+1..t``; the first rows average what exists."""
    csum = np.cumsum(series, axis=0, dtype=np.float64)
    out = csum.copy()
    out[window:] -= csum[:-window]
    counts = np.minimum(np.arange(1, len(series) + 1), window).astype(np.float64)
    return out / counts.reshape((-1,) + (1,) * (series.ndim - 1))


def build_context(grid: DemandGrid, holidays=None, weather=None, weather_width: int | None = None,
                  train_intervals: int | None = None,
                  recent_scale: Normalizer | None = None) -> ContextFeatures:
    """Assemble the context tensor for every interval and region.

    ``holidays`` is a collection of ``datetime.date`` (UTC days); ``weather`` an
    integer code per interval, one-hot encoded into ``weather_width`` slots.
    The recent-demand scaler is fitted on rows ``t < train_intervals`` unless
    ``recent_scale`` is supplied.  A constant history is scaled by a unit span.
    """
    n_t, n = grid.n_intervals, grid.spec.n_regions
    if n_t < RECENT_WINDOW:
        raise InsufficientHistoryError(f"context needs >= {RECENT_WINDOW} intervals, grid has {n_t}")
    t = np.arange(n_t)
    recent = recent_mean(grid.series)
    if recent_scale is None:
        fit_rows = recent if train_intervals is None else recent[:train_intervals]
        lo, hi = float(fit_rows.min()), float(fit_rows.max())
        # a constant history carries no scale; map it to 0 instead of failing
        recent_scale = fit_normalizer(fit_rows) if hi > lo else Normalizer(lo, lo + 1.0)

    blocks: list[tuple[str, np.ndarray]] = [("recent_demand", recent_scale.normalize(recent)[..., None])]

    per_day = grid.spec.intervals_per_day
    tod = np.zeros((n_t, per_day))
    tod[t, grid.time_of_day(t)] = 1.0
    blocks.append(("time_of_day", np.broadcast_to(tod[:, None, :], (n_t, n, per_day))))

    dow = np.zeros((n_t, 7))
    dow[t, grid.day_of_week(t)] = 1.0
    blocks.append(("day_of_week", np.broadcast_to(dow[:, None, :], (n_t, n, 7))))

    spec = grid.spec
    centers = spec.region_centers()
    loc = np.stack([(centers[:, 0] - spec.lat_min) / (spec.lat_max - spec.lat_min),
                    (centers[:, 1] - spec.lng_min) / (spec.lng_max - spec.lng_min)], axis=1)
    blocks.append(("location", np.broadcast_to(loc[None], (n_t, n, 2))))

    if weather is not None:
        codes = np.asarray(weather, dtype=int)
        if codes.shape != (n_t,):
            raise ShapeError(f"weather needs one code per interval ({n_t}), got {codes.shape}")
        width = weather_width if weather_width is not None else int(codes.max()) + 1
        if codes.min() < 0 or codes.max() >= width:
            raise ShapeError(f"weather codes must lie in [0, {width})")
        wx = np.zeros((n_t, width))
        wx[t, codes] = 1.0
        blocks.append(("weather", np.broadcast_to(wx[:, None, :], (n_t, n, width))))
    else:
        blocks.append(("weather", np.zeros((n_t, n, 0))))

    flag = np.zeros(n_t)
    if holidays:
        days = {d if isinstance(d, _dt.date) else _dt.date.fromisoformat(str(d)) for d in holidays}
        epoch = _dt.date(1970, 1, 1)
        for k, day in enumerate(grid.day_index(t)):
            if epoch + _dt.timedelta(days=int(day)) in days:
                flag[k] = 1.0
    blocks.append(("holiday", np.broadcast_to(flag[:, None, None], (n_t, n, 1))))

    layout = {}
    pos = 0
    for name, arr in blocks:
        layout[name] = (pos, pos + arr.shape[-1])
        pos += arr.shape[-1]
    values = np.concatenate([arr for _, arr in blocks], axis=-1)
    return ContextFeatures(values, layout, recent_scale)
