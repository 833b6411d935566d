"""Run configuration: one flat JSON object, defaults below, command-line flags win."""
from __future__ import annotations

import csv
import datetime as _dt
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import LINEAR_KINDS
from .errors import ConfigError, FormatError
from .model import VARIANTS, ModelConfig

SCHEMA_VERSION = 1
ALL_VARIANTS = VARIANTS + ("ha",) + LINEAR_KINDS + ("mlp",)


@dataclass
class RunConfig:
    # paths
    data: str | None = None
    output: str | None = None
    checkpoint: str | None = None
    holidays: str | None = None
    weather: str | None = None
    weather_width: int | None = None
    # grid (used by ingest / synth); None -> the synthetic default 10x10 box
    grid: dict | None = None
    # data preparation
    train_days: int = 28
    threshold: float = 10.0
    train_subsample: float = 1.0
    # semantic view
    alpha: float = 1.0
    dtw_window: int | None = None
    line_samples: int = 1_000_000
    # model
    variant: str = "full"
    seq_len: int = 8
    patch_size: int = 9
    conv_layers: int = 3
    filters: int = 64
    spatial_dim: int = 64
    hidden: int = 128
    embed_dim: int = 32
    semantic_dim: int = 6
    bn_momentum: float = 0.99
    per_step_cnn: bool = False
    finetune_embeddings: bool = False
    # baselines
    reg_weight: float = 1e-3
    mlp_layers: list[int] = field(default_factory=lambda: [128, 128, 64, 64])
    ha_by_day_of_week: bool = True
    # training
    gamma: float = 1.0
    lr: float = 1e-3
    batch_size: int = 64
    max_epoch: int = 100
    early_stop: int = 10
    seed: int = 0
    workers: int = 1
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.variant not in ALL_VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {ALL_VARIANTS}")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"config schema {self.schema_version}, this build reads {SCHEMA_VERSION}")
        if not 0 < self.train_subsample <= 1:
            raise ConfigError("train_subsample must lie in (0, 1]")
        if self.workers != 1:
            raise ConfigError("only workers=1 is supported")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @property
    def is_network(self) -> bool:
        return self.variant in VARIANTS

    def model_config(self, context_dim: int) -> ModelConfig:
        keys = {f.name for f in fields(ModelConfig)} - {"context_dim"}
        values = {k: v for k, v in self.to_dict().items() if k in keys}
        return ModelConfig(context_dim=context_dim, **values)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the JSON file at ``path``, then non-None ``overrides``."""
    values: dict = {}
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        values.update(loaded)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.from_dict(values)


def run_manifest(config: RunConfig, command: str, argv: list[str] | None = None, **extra) -> dict:
    return {"command": command, "version": __version__, "seed": config.seed,
            "config": config.to_dict(), "argv": list(argv or []), **extra}


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def load_weather(path, n_intervals: int) -> np.ndarray:
    """``interval_index,code`` rows -> one integer code per interval (0 where unlisted)."""
    codes = np.zeros(n_intervals, dtype=np.int64)
    with open(path, newline="", encoding="utf-8") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or (k == 0 and row[0].strip() == "interval_index"):
                continue
            try:
                t, code = int(row[0]), int(row[1])
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{k + 1}: expected interval_index,code") from exc
            if 0 <= t < n_intervals:
                codes[t] = code
    return codes


def load_holidays(path) -> set[_dt.date]:
    """``date,flag`` rows (ISO date, 0/1) -> the set of flagged dates."""
    days = set()
    with open(path, newline="", encoding="utf-8") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or (k == 0 and row[0].strip() == "date"):
                continue
            try:
                day, flag = _dt.date.fromisoformat(row[0].strip()), int(row[1])
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}:{k + 1}: expected date,flag") from exc
            if flag:
                days.add(day)
    return days
