"""Spatial view: S x S neighbourhood patches encoded by a local CNN."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .nn import BatchNorm, Conv2d, Dense, Module, Tensor, as_tensor


@dataclass(frozen=True)
class PatchConfig:
    size: int = 9        # S
    layers: int = 3      # K
    filters: int = 64    # lambda
    out_dim: int = 64    # d

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise ShapeError(f"patch size must be odd, got {self.size}")
        if self.layers < 1 or self.filters < 1 or self.out_dim < 1:
            raise ShapeError("layers, filters and out_dim must all be >= 1")


def extract_patch(grid_slice: np.ndarray, center, size: int) -> np.ndarray:
    """Cut the ``size x size`` window centred on ``center``; cells outside the city are 0.

    ``grid_slice`` is a ``(W, H)`` array of normalized demand at one interval;
    ``center`` is a flat region index or an ``(x, y)`` cell.
    """
    grid_slice = np.asarray(grid_slice, dtype=np.float64)
    w, h = grid_slice.shape
    if np.ndim(center) == 0:
        x, y = divmod(int(center), h)
    else:
        x, y = (int(c) for c in center)
    if not (0 <= x < w and 0 <= y < h):
        raise ShapeError(f"center {(x, y)} outside a {w}x{h} grid")
    p = (size - 1) // 2
    padded = np.pad(grid_slice, p)
    return padded[x:x + size, y:y + size, None].copy()


class LocalCNN(Module):
    """K x (conv3x3 -> batchnorm -> relu), flatten, dense -> relu."""

    def __init__(self, config: PatchConfig, rng: np.random.Generator, bn_momentum: float = 0.99):
        super().__init__()
        self.config = config
        c_in = 1
        for k in range(config.layers):
            setattr(self, f"conv{k}", Conv2d(c_in, config.filters, rng))
            setattr(self, f"bn{k}", BatchNorm(config.filters, momentum=bn_momentum))
            c_in = config.filters
        self.fc = Dense(config.size * config.size * config.filters, config.out_dim, rng)

    def forward(self, patches) -> Tensor:
        """``(B, S, S, 1)`` -> ``(B, d)``; a single ``(S, S, 1)`` patch gives ``(d,)``."""
        x = as_tensor(patches)
        single = x.ndim == 3
        if single:
            x = x.reshape((1,) + x.shape)
        s = self.config.size
        if x.shape[1:] != (s, s, 1):
            raise ShapeError(f"expected patches of shape (B, {s}, {s}, 1), got {x.shape}")
        for k in range(self.config.layers):
            conv = getattr(self, f"conv{k}")
            bn = getattr(self, f"bn{k}")
            x = bn(conv(x)).relu()
        out = self.fc(x.reshape(x.shape[0], -1)).relu()
        return out.reshape(-1) if single else out


def local_cnn_forward(patch, params: LocalCNN) -> Tensor:
    return params(patch)
