from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateRangeError


@dataclass(frozen=True)
class Normalizer:
    """Max-min affine scaling fitted on training data; no clamping outside the fitted range."""

    min: float
    max: float

    def __post_init__(self):
        if not self.max > self.min:
            raise DegenerateRangeError(f"max ({self.max}) must exceed min ({self.min})")

    @property
    def span(self) -> float:
        return self.max - self.min

    def normalize(self, x):
        return (np.asarray(x, dtype=np.float64) - self.min) / self.span

    def denormalize(self, z):
        return np.asarray(z, dtype=np.float64) * self.span + self.min

    def to_dict(self) -> dict:
        return {"min": self.min, "max": self.max}


def fit_normalizer(values) -> Normalizer:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DegenerateRangeError("cannot fit a normalizer on no values")
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        raise DegenerateRangeError(f"training range is degenerate: min = max = {lo}")
    return Normalizer(lo, hi)
