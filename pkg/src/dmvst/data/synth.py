"""Seeded synthetic city with planted periodic, spatial and semantic structure.

Each region belongs to one of ``n_clusters`` functional clusters placed at
random (so cluster membership is unrelated to location).  A cluster owns a
weekly profile with distinct weekday and weekend shapes.  Demand is

    latent_i(t) = profile_c(i)(t) * (1 + z_i(t))
    demand_i(t) = round(latent_i(t) + kappa * mean_{j in 8-nbrs(i)} latent_j(t) + eps_i(t))

where ``z_i`` is a per-region AR(1) drift with stationary std ``drift`` and
``eps_i(t) ~ N(0, (noise * latent_i(t))^2)``.  With ``kappa = drift = noise = 0``
every region reproduces its cluster profile exactly.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .grid import DemandGrid, GridSpec, TaxiRequest

# 2017-02-06 00:00:00 UTC, a Monday
DEFAULT_START = 1486339200


@dataclass
class SynthConfig:
    kappa: float = 0.3
    noise: float = 0.05
    drift: float = 0.3
    drift_phi: float = 0.95
    level: float = 40.0
    n_clusters: int = 2
    start_time: int = DEFAULT_START


@dataclass
class SynthTruth:
    clusters: np.ndarray           # (N,) cluster id per region
    profiles: np.ndarray           # (n_clusters, 7 * intervals_per_day) integer weekly profiles
    config: dict = field(default_factory=dict)


def default_spec(width: int = 10, height: int = 10, interval_minutes: int = 30) -> GridSpec:
    return GridSpec(23.0, 23.0 + 0.007 * height, 113.2, 113.2 + 0.007 * width, width, height,
                    interval_minutes)


def _bump(hours: np.ndarray, center: float, width: float) -> np.ndarray:
    d = np.minimum(np.abs(hours - center), 24 - np.abs(hours - center))
    return np.exp(-0.5 * (d / width) ** 2)


def cluster_profiles(n_clusters: int, per_day: int, level: float, rng: np.random.Generator) -> np.ndarray:
    """Integer weekly profiles; cluster shapes differ in peak hours and weekend behaviour."""
    hours = (np.arange(per_day) + 0.5) * 24.0 / per_day
    out = np.zeros((n_clusters, 7 * per_day))
    for c in range(n_clusters):
        if c % 2 == 0:
            # residential: sharp morning commute peak on weekdays, flat late mornings at weekends
            weekday = 0.15 + 1.0 * _bump(hours, 8.0, 1.2) + 0.35 * _bump(hours, 19.0, 2.0)
            weekend = 0.15 + 0.45 * _bump(hours, 11.0, 2.5) + 0.35 * _bump(hours, 20.0, 2.0)
        else:
            # commercial: evening peak, busier at weekends
            weekday = 0.15 + 0.3 * _bump(hours, 12.5, 1.5) + 0.9 * _bump(hours, 18.5, 1.5)
            weekend = 0.2 + 0.6 * _bump(hours, 14.0, 3.0) + 1.0 * _bump(hours, 21.0, 1.5)
        if c >= 2:
            shift = int(rng.integers(1, per_day // 4))
            weekday, weekend = np.roll(weekday, shift), np.roll(weekend, shift)
        week = np.concatenate([np.tile(weekday, 5), np.tile(weekend, 2)])
        out[c] = np.round(level * week)
    return out


def _neighbour_mean(field3: np.ndarray) -> np.ndarray:
    """Mean over the (up to 8) in-grid neighbours of every cell; ``field3`` is (T, W, H)."""
    _, w, h = field3.shape
    padded = np.pad(field3, ((0, 0), (1, 1), (1, 1)))
    ones = np.pad(np.ones((w, h)), 1)
    total = np.zeros_like(field3)
    count = np.zeros((w, h))
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == dy == 0:
                continue
            total += padded[:, 1 + dx:1 + dx + w, 1 + dy:1 + dy + h]
            count += ones[1 + dx:1 + dx + w, 1 + dy:1 + dy + h]
    return total / count


def synth_generate(seed: int, spec: GridSpec | None = None, days: int = 35,
                   config: SynthConfig | None = None) -> tuple[DemandGrid, SynthTruth]:
    spec = spec or default_spec()
    config = config or SynthConfig()
    rng = np.random.default_rng(seed)
    per_day = spec.intervals_per_day
    n_t = days * per_day
    n = spec.n_regions

    clusters = rng.permutation(np.arange(n) % config.n_clusters)
    profiles = cluster_profiles(config.n_clusters, per_day, config.level, rng)
    offset = ((config.start_time // 86400 + 3) % 7) * per_day  # weekly slot of interval 0
    slots = (offset + np.arange(n_t)) % (7 * per_day)
    base = profiles[clusters][:, slots].T  # (T, N)

    z = np.zeros((n_t, n))
    if config.drift > 0:
        phi = config.drift_phi
        innov = rng.normal(0.0, config.drift * np.sqrt(1 - phi * phi), size=(n_t, n))
        z[0] = rng.normal(0.0, config.drift, size=n)
        for k in range(1, n_t):
            z[k] = phi * z[k - 1] + innov[k]
    latent = base * np.maximum(1.0 + z, 0.0)

    latent3 = latent.reshape(n_t, spec.width, spec.height)
    demand = latent3 + config.kappa * _neighbour_mean(latent3) if config.kappa else latent3.copy()
    if config.noise > 0:
        demand = demand + rng.normal(size=demand.shape) * config.noise * latent3
    counts = np.maximum(np.round(demand), 0).astype(np.int64)

    grid = DemandGrid(spec, counts, config.start_time)
    truth = SynthTruth(clusters, profiles, {"seed": seed, "days": days, **asdict(config)})
    return grid, truth


def grid_to_requests(grid: DemandGrid, seed: int = 0) -> list[TaxiRequest]:
    """Expand counts into individual requests spread uniformly inside each cell and interval.

    Every request gets its own user id, so deduplication leaves the counts intact.
    """
    rng = np.random.default_rng(seed)
    spec = grid.spec
    dt = spec.interval_seconds
    dlat = (spec.lat_max - spec.lat_min) / spec.height
    dlng = (spec.lng_max - spec.lng_min) / spec.width
    t_idx, xs, ys = np.nonzero(grid.counts)
    reps = grid.counts[t_idx, xs, ys]
    t_all, x_all, y_all = np.repeat(t_idx, reps), np.repeat(xs, reps), np.repeat(ys, reps)
    m = len(t_all)
    ts = grid.start_time + t_all * dt + rng.integers(0, dt, size=m)
    lat = spec.lat_min + (y_all + rng.uniform(0.05, 0.95, size=m)) * dlat
    lng = spec.lng_min + (x_all + rng.uniform(0.05, 0.95, size=m)) * dlng
    per_t = np.bincount(t_all, minlength=grid.n_intervals)
    within = np.arange(m) - (np.cumsum(per_t) - per_t)[t_all]
    order = np.argsort(ts, kind="stable")
    return [TaxiRequest(int(ts[k]), float(lat[k]), float(lng[k]), f"u{t_all[k]}-{within[k]}")
            for k in order]
