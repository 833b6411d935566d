"""MAPE / RMSE, metric reports with a per-day breakdown, and table rendering."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .data.normalize import Normalizer
from .data.samples import SampleSet
from .errors import EvaluationError, MetricDomainError, MetricError

DAY_NAMES = ("Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun")
WEEKEND = (5, 6)


def _pair(pred, actual) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64).ravel()
    actual = np.asarray(actual, dtype=np.float64).ravel()
    if pred.shape != actual.shape:
        raise MetricError(f"length mismatch: {pred.size} predictions vs {actual.size} actuals")
    if pred.size == 0:
        raise MetricError("metrics of an empty set are undefined")
    return pred, actual


def mape(pred, actual) -> float:
    """``mean(|pred - actual| / actual)``; actuals must be positive."""
    pred, actual = _pair(pred, actual)
    if np.any(actual <= 0):
        raise MetricDomainError("MAPE needs strictly positive actual values")
    return float(np.mean(np.abs(pred - actual) / actual))


def rmse(pred, actual) -> float:
    pred, actual = _pair(pred, actual)
    return float(np.sqrt(np.mean((pred - actual) ** 2)))


@dataclass
class MetricReport:
    mape: float
    rmse: float
    count: int
    per_day: dict[str, dict] = field(default_factory=dict)   # day name -> {mape, rmse, count}
    weekday_mape: float | None = None
    weekend_mape: float | None = None
    weekend_increase: float | None = None   # |wk - wd| / wd, absent when a partition is empty

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(**d)


def metric_report(pred, actual, day_of_week=None) -> MetricReport:
    """MAPE/RMSE over all pairs plus, given each pair's day of week, the daily breakdown.

    Weekday and weekend MAPE are averaged per sample.
    """
    pred, actual = _pair(pred, actual)
    report = MetricReport(mape(pred, actual), rmse(pred, actual), int(pred.size))
    if day_of_week is None:
        return report
    dow = np.asarray(day_of_week).ravel()
    if dow.shape != pred.shape:
        raise MetricError("need one day-of-week per prediction")
    for d, name in enumerate(DAY_NAMES):
        sel = dow == d
        if sel.any():
            report.per_day[name] = {"mape": mape(pred[sel], actual[sel]),
                                    "rmse": rmse(pred[sel], actual[sel]), "count": int(sel.sum())}
    weekend = np.isin(dow, WEEKEND)
    if weekend.any():
        report.weekend_mape = mape(pred[weekend], actual[weekend])
    if (~weekend).any():
        report.weekday_mape = mape(pred[~weekend], actual[~weekend])
    if report.weekend_mape is not None and report.weekday_mape is not None:
        wd, wk = report.weekday_mape, report.weekend_mape
        if wd > 0:
            report.weekend_increase = abs(wk - wd) / wd
        elif wk == 0:
            report.weekend_increase = 0.0
    return report


def _predict(model, samples: SampleSet, normalizer: Normalizer) -> np.ndarray:
    if hasattr(model, "predict_samples"):
        return np.asarray(model.predict_samples(samples, normalizer), dtype=np.float64)
    from .training import predict
    return predict(samples, model, normalizer)


def evaluate(model, samples: SampleSet, normalizer: Normalizer) -> MetricReport:
    """Denormalized metrics of a trained model or baseline on ``samples``.

    Samples are scored in a canonical ``(t, region)`` order so the report does
    not depend on how the caller ordered them.
    """
    if len(samples) == 0:
        raise EvaluationError("empty test set")
    order = np.lexsort((samples.region, samples.t))
    canon = samples.subset(order)
    pred = _predict(model, canon, normalizer)
    return metric_report(pred, canon.target_raw, canon.target_day_of_week())


def format_table(rows: dict[str, MetricReport], title: str = "") -> str:
    """Aligned text table: one row per method with MAPE, RMSE and sample count."""
    name_w = max([len("Method")] + [len(k) for k in rows])
    lines = []
    if title:
        lines.append(title)
    header = f"{'Method':<{name_w}}  {'MAPE':>8}  {'RMSE':>9}  {'count':>7}"
    lines += [header, "-" * len(header)]
    for name, r in rows.items():
        lines.append(f"{name:<{name_w}}  {r.mape:>8.4f}  {r.rmse:>9.4f}  {r.count:>7d}")
    return "\n".join(lines)


def format_days(rows: dict[str, MetricReport]) -> str:
    """Per-day MAPE table with weekday/weekend averages and the relative increase."""
    name_w = max([len("Method")] + [len(k) for k in rows])
    cols = list(DAY_NAMES) + ["wd", "wk", "RIE"]
    header = f"{'Method':<{name_w}}" + "".join(f"  {c:>7}" for c in cols)
    lines = [header, "-" * len(header)]

    def cell(v):
        return f"  {v:>7.4f}" if v is not None else f"  {'-':>7}"

    for name, r in rows.items():
        vals = [r.per_day.get(d, {}).get("mape") for d in DAY_NAMES]
        vals += [r.weekday_mape, r.weekend_mape, r.weekend_increase]
        lines.append(f"{name:<{name_w}}" + "".join(cell(v) for v in vals))
    return "\n".join(lines)
