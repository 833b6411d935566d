"""Raw taxi requests -> filtered requests -> per-cell, per-interval demand counts."""
from __future__ import annotations

import csv
import io
import os
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from ..errors import FormatError, InputError

SECONDS_PER_DAY = 86400


@dataclass(frozen=True)
class TaxiRequest:
    timestamp: int
    lat: float
    lng: float
    user_id: str


@dataclass(frozen=True)
class GridSpec:
    """Uniform lat/lng partition of a bounding box into ``width x height`` cells.

    ``width`` bins longitude and ``height`` bins latitude; region ``i`` is the
    row-major flat index ``x * height + y`` of cell ``(x, y)``.
    """

    lat_min: float
    lat_max: float
    lng_min: float
    lng_max: float
    width: int
    height: int
    interval_minutes: int = 30

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InputError(f"grid needs width, height >= 1, got {self.width}x{self.height}")
        if self.interval_minutes < 1 or 1440 % self.interval_minutes:
            raise InputError(f"interval_minutes={self.interval_minutes} must divide 1440")
        if not (self.lat_max > self.lat_min and self.lng_max > self.lng_min):
            raise InputError("bounding box must have positive extent")

    @property
    def n_regions(self) -> int:
        return self.width * self.height

    @property
    def interval_seconds(self) -> int:
        return self.interval_minutes * 60

    @property
    def intervals_per_day(self) -> int:
        return 1440 // self.interval_minutes

    def contains(self, lat: float, lng: float) -> bool:
        return self.lat_min <= lat <= self.lat_max and self.lng_min <= lng <= self.lng_max

    def cell_of(self, lat, lng):
        """Cell ``(x, y)`` by uniform binning; the upper edge folds into the last cell."""
        fx = (np.asarray(lng, dtype=float) - self.lng_min) / (self.lng_max - self.lng_min)
        fy = (np.asarray(lat, dtype=float) - self.lat_min) / (self.lat_max - self.lat_min)
        x = np.minimum(np.floor(fx * self.width).astype(int), self.width - 1)
        y = np.minimum(np.floor(fy * self.height).astype(int), self.height - 1)
        return x, y

    def region_of(self, lat, lng):
        x, y = self.cell_of(lat, lng)
        return x * self.height + y

    def region_cell(self, region: int) -> tuple[int, int]:
        return divmod(int(region), self.height)

    def region_centers(self) -> np.ndarray:
        """``(N, 2)`` array of (lat, lng) cell centers in region order."""
        xs, ys = np.divmod(np.arange(self.n_regions), self.height)
        lng = self.lng_min + (xs + 0.5) * (self.lng_max - self.lng_min) / self.width
        lat = self.lat_min + (ys + 0.5) * (self.lat_max - self.lat_min) / self.height
        return np.stack([lat, lng], axis=1)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class DemandGrid:
    """``counts[t, x, y]`` = requests in cell ``(x, y)`` during interval ``t``.

    Interval ``t`` covers ``[start_time + t*dt, start_time + (t+1)*dt)``.
    """

    spec: GridSpec
    counts: np.ndarray
    start_time: int
    excluded: int = 0

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 3 or self.counts.shape[1:] != (self.spec.width, self.spec.height):
            raise InputError(f"counts shape {self.counts.shape} does not match grid "
                             f"{self.spec.width}x{self.spec.height}")
        if not np.issubdtype(self.counts.dtype, np.integer):
            if np.any(self.counts != np.round(self.counts)):
                raise InputError("demand counts must be integers")
            self.counts = self.counts.astype(np.int64)
        if np.any(self.counts < 0):
            raise InputError("demand counts must be non-negative")

    @property
    def n_intervals(self) -> int:
        return self.counts.shape[0]

    @property
    def series(self) -> np.ndarray:
        """``(T, N)`` view in region order."""
        return self.counts.reshape(self.n_intervals, -1)

    def interval_start(self, t) -> np.ndarray:
        return self.start_time + np.asarray(t) * self.spec.interval_seconds

    def time_of_day(self, t) -> np.ndarray:
        return (self.interval_start(t) % SECONDS_PER_DAY) // self.spec.interval_seconds

    def day_of_week(self, t) -> np.ndarray:
        """Monday = 0, treating timestamps as UTC (1970-01-01 was a Thursday)."""
        return (self.interval_start(t) // SECONDS_PER_DAY + 3) % 7

    def day_index(self, t) -> np.ndarray:
        return self.interval_start(t) // SECONDS_PER_DAY

    def slice(self, start: int, stop: int) -> "DemandGrid":
        return DemandGrid(self.spec, self.counts[start:stop],
                          int(self.interval_start(start)))


@dataclass
class ParseReport:
    rows: int = 0
    malformed: int = 0
    out_of_bounds: int = 0

    @property
    def rejected(self) -> int:
        return self.malformed + self.out_of_bounds


def parse_requests(source, spec: GridSpec | None = None, max_malformed: float = 0.5):
    """Read ``timestamp,lat,lng,user_id`` CSV rows.

    ``source`` is a path, an open text file, or an iterable of lines.  Returns
    ``(requests, report)``.  Malformed rows and rows outside ``spec``'s bounding
    box are skipped and counted; more than ``max_malformed`` malformed rows
    raises :class:`FormatError`.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(Path(source), newline="", encoding="utf-8") as fh:
            return _parse_lines(fh, spec, max_malformed)
    if isinstance(source, (bytes, bytearray)):
        source = io.StringIO(source.decode("utf-8"))
    return _parse_lines(source, spec, max_malformed)


def _parse_lines(lines: Iterable[str], spec, max_malformed):
    report = ParseReport()
    out: list[TaxiRequest] = []
    first = True
    for row in csv.reader(lines):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if first:
            first = False
            if row[0].strip() == "timestamp":
                continue
        report.rows += 1
        if len(row) != 4:
            report.malformed += 1
            continue
        try:
            ts = int(row[0])
            lat = float(row[1])
            lng = float(row[2])
        except ValueError:
            report.malformed += 1
            continue
        user = row[3].strip()
        if not user or not np.isfinite(lat) or not np.isfinite(lng):
            report.malformed += 1
            continue
        if spec is not None and not spec.contains(lat, lng):
            report.out_of_bounds += 1
            continue
        out.append(TaxiRequest(ts, lat, lng, user))
    if report.rows and report.malformed / report.rows > max_malformed:
        raise FormatError(f"{report.malformed} of {report.rows} rows malformed")
    return out, report


def dedup_filter(requests: list[TaxiRequest], spec: GridSpec, daily_cap: int = 100) -> list[TaxiRequest]:
    """Drop spammers, then keep one request per (user, interval, cell).

    A user with more than ``daily_cap`` raw requests on a (UTC) day loses all of
    that day's requests.  Among duplicates the earliest-listed request survives.
    """
    per_day = Counter((r.user_id, r.timestamp // SECONDS_PER_DAY) for r in requests)
    seen = set()
    kept = []
    dt = spec.interval_seconds
    for r in requests:
        if per_day[(r.user_id, r.timestamp // SECONDS_PER_DAY)] > daily_cap:
            continue
        key = (r.user_id, r.timestamp // dt, int(spec.region_of(r.lat, r.lng)))
        if key in seen:
            continue
        seen.add(key)
        kept.append(r)
    return kept


def aggregate_demand(requests: list[TaxiRequest], spec: GridSpec, start_time: int | None = None,
                     end_time: int | None = None) -> DemandGrid:
    """Count requests per interval and cell.

    Without explicit bounds the range runs from midnight (UTC) of the earliest
    request to the end of the interval holding the latest one.  Requests
    outside ``[start_time, end_time)`` or outside the bounding box are dropped
    and tallied in ``grid.excluded``.
    """
    dt = spec.interval_seconds
    ts = np.array([r.timestamp for r in requests], dtype=np.int64)
    if start_time is None:
        start_time = int(ts.min() // SECONDS_PER_DAY * SECONDS_PER_DAY) if len(ts) else 0
    if end_time is None:
        end_time = int(-(-(ts.max() + 1) // dt) * dt) if len(ts) else start_time
    n_t = max(0, (end_time - start_time) // dt)
    counts = np.zeros((n_t, spec.width, spec.height), dtype=np.int64)
    if not len(ts):
        return DemandGrid(spec, counts, start_time)

    lat = np.array([r.lat for r in requests])
    lng = np.array([r.lng for r in requests])
    t_idx = (ts - start_time) // dt
    inside = (ts >= start_time) & (t_idx < n_t)
    inside &= (lat >= spec.lat_min) & (lat <= spec.lat_max) & (lng >= spec.lng_min) & (lng <= spec.lng_max)
    x, y = spec.cell_of(lat[inside], lng[inside])
    np.add.at(counts, (t_idx[inside], x, y), 1)
    return DemandGrid(spec, counts, start_time, excluded=int((~inside).sum()))
