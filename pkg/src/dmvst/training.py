"""Mini-batch Adam training with early stopping, and denormalized prediction."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .data.normalize import Normalizer
from .data.samples import SampleSet
from .errors import ConsistencyError, DivergenceError, TrainingError
from .model import Forecaster, demand_loss
from .nn import Adam

log = logging.getLogger(__name__)


@dataclass
class TrainReport:
    train_loss: list[float] = field(default_factory=list)   # per-sample training loss, averaged over the epoch
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")
    stop_reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainSettings:
    gamma: float = 1.0
    lr: float = 1e-3
    batch_size: int = 64
    max_epoch: int = 100
    early_stop: int = 10
    seed: int = 0


def settings_from(model: Forecaster, **overrides) -> TrainSettings:
    cfg = model.config_dict()
    base = {k: cfg[k] for k in ("gamma", "lr", "batch_size", "max_epoch", "early_stop", "seed") if k in cfg}
    base.update(overrides)
    return TrainSettings(**base)


def _snapshot(model: Forecaster) -> tuple[list[np.ndarray], dict[str, np.ndarray]]:
    return ([p.data.copy() for p in model.parameters()],
            {k: v.copy() for k, v in model.named_buffers()})


def _restore(model: Forecaster, snap) -> None:
    params, buffers = snap
    for p, value in zip(model.parameters(), params):
        p.data = value.copy()
    for k, v in buffers.items():
        model.set_buffer(k, v)


def mean_loss(model: Forecaster, samples: SampleSet, gamma: float, batch: int = 128) -> float:
    """Per-sample training loss in inference mode."""
    pred = model.predict_normalized(samples, batch)
    return float(demand_loss(pred, samples.target, gamma).data) / max(len(samples), 1)


def train(model: Forecaster, train_set: SampleSet, val_set: SampleSet | None = None,
          settings: TrainSettings | None = None) -> TrainReport:
    """Fit ``model`` in place and return the report.

    Each epoch shuffles the training samples into batches and takes one Adam
    step per batch on the loss (plus any model penalty).  With a validation set,
    training stops after ``early_stop`` epochs without improvement and the
    best-epoch parameters are restored; otherwise it runs ``max_epoch`` epochs.
    """
    settings = settings or settings_from(model)
    n = len(train_set)
    if n == 0:
        raise TrainingError("empty training set")
    _, shuffle_seed = np.random.SeedSequence(settings.seed).spawn(2)
    rng = np.random.default_rng(shuffle_seed)
    names = [name for name, _ in model.named_parameters()]
    opt = Adam(model.parameters(), lr=settings.lr, names=names)
    report = TrainReport()
    best = None
    wait = 0

    for epoch in range(settings.max_epoch):
        model.train()
        order = rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, settings.batch_size)):
            idx = order[start:start + settings.batch_size]
            pred = model.forward_batch(train_set, idx)
            fit = demand_loss(pred, train_set.target[idx], settings.gamma)
            penalty = model.penalty()
            loss = fit + penalty if penalty is not None else fit
            value = float(loss.data)
            if not np.isfinite(value):
                raise DivergenceError(epoch, b, value)
            total += float(fit.data)
            opt.zero_grad()
            loss.backward()
            opt.step()
        report.train_loss.append(total / n)

        if val_set is None or len(val_set) == 0:
            continue
        val = mean_loss(model, val_set, settings.gamma)
        if not np.isfinite(val):
            raise DivergenceError(epoch, -1, val)
        report.val_loss.append(val)
        log.debug("epoch %d train %.6g val %.6g", epoch, report.train_loss[-1], val)
        if val < report.best_val_loss:
            report.best_val_loss = val
            report.best_epoch = epoch
            best = _snapshot(model)
            wait = 0
        else:
            wait += 1
            if wait >= settings.early_stop:
                report.stop_reason = "early_stop"
                break

    if not report.stop_reason:
        report.stop_reason = "max_epoch"
    if best is not None:
        _restore(model, best)
    else:
        report.best_epoch = len(report.train_loss) - 1
    model.eval()
    return report


def predict(samples: SampleSet, model: Forecaster, normalizer: Normalizer) -> np.ndarray:
    """Denormalized demand predictions, one per sample, in sample order."""
    own = getattr(model, "normalizer", None)
    if own is not None and (own.min != normalizer.min or own.max != normalizer.max):
        raise ConsistencyError(f"normalizer [{normalizer.min}, {normalizer.max}] differs from the "
                               f"model's [{own.min}, {own.max}]")
    return normalizer.denormalize(model.predict_normalized(samples))
