"""The joint multi-view network, its ablation variants, and the shared loss."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .data.samples import Sample, SampleSet
from .errors import ConfigError, LossDomainError, ShapeError
from .nn import Dense, Module, Tensor, as_tensor, concat
from .semantic import SemanticProjection
from .spatial import LocalCNN, PatchConfig
from .temporal import LSTM, lstm_sequence

VARIANTS = ("temporal", "temporal+semantic", "temporal+neighbor", "temporal+lcnn", "full")


@dataclass
class ModelConfig:
    variant: str = "full"
    patch_size: int = 9
    conv_layers: int = 3
    filters: int = 64
    spatial_dim: int = 64
    seq_len: int = 8
    context_dim: int = 59
    hidden: int = 128
    embed_dim: int = 32
    semantic_dim: int = 6
    gamma: float = 1.0
    lr: float = 1e-3
    batch_size: int = 64
    max_epoch: int = 100
    early_stop: int = 10
    bn_momentum: float = 0.99
    per_step_cnn: bool = False
    finetune_embeddings: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")

    @property
    def uses_lcnn(self) -> bool:
        return self.variant in ("temporal+lcnn", "full")

    @property
    def uses_neighbors(self) -> bool:
        return self.variant == "temporal+neighbor"

    @property
    def uses_semantic(self) -> bool:
        return self.variant in ("temporal+semantic", "full")

    @property
    def step_width(self) -> int:
        """Width of the per-step LSTM input ``g``."""
        extra = 0
        if self.uses_lcnn:
            extra = self.spatial_dim
        elif self.uses_neighbors:
            extra = self.patch_size**2 - 1
        return extra + self.context_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def demand_loss(pred, target, gamma: float) -> Tensor:
    """``sum_i (y_i - p_i)^2 + gamma * ((y_i - p_i) / y_i)^2`` in normalized space."""
    pred = as_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    if np.any(target == 0):
        raise LossDomainError("a target is exactly 0; the percentage term is undefined")
    err = Tensor(target) - pred
    loss = (err * err).sum()
    if gamma:
        rel = err * (1.0 / target)
        loss = loss + (rel * rel).sum() * gamma
    return loss


class Forecaster(Module):
    """Anything trainable by :func:`dmvst.training.train`."""

    kind = "base"
    normalizer = None

    def forward_batch(self, samples: SampleSet, idx) -> Tensor:
        raise NotImplementedError

    def penalty(self) -> Tensor | None:
        return None

    def predict_normalized(self, samples: SampleSet, batch: int = 128) -> np.ndarray:
        was_training = self.training
        self.eval()
        try:
            out = [self.forward_batch(samples, np.arange(s, min(s + batch, len(samples)))).data
                   for s in range(0, len(samples), batch)]
        finally:
            self.train(was_training)
        return np.concatenate(out) if out else np.zeros(0)

    def config_dict(self) -> dict:
        raise NotImplementedError


class DMVSTNet(Forecaster):
    """Local-CNN spatial view -> LSTM temporal view, joined with the semantic view.

    Per step ``k``: ``g_k = s_hat_k (+) e_k``; ``h = LSTM(g_1..g_h)``;
    ``q = h (+) m_hat``; ``y_hat = sigmoid(W_ff q + b_ff)``.  Ablation variants
    drop the spatial and/or semantic inputs, or replace the CNN output with the
    raw ``S*S - 1`` neighbour values.
    """

    kind = "dmvst"

    def __init__(self, config: ModelConfig, n_regions: int | None = None,
                 embeddings: np.ndarray | None = None):
        super().__init__()
        self.config = config
        init, _ = np.random.SeedSequence(config.seed).spawn(2)
        rng = np.random.default_rng(init)
        if config.uses_lcnn:
            patch = PatchConfig(config.patch_size, config.conv_layers, config.filters, config.spatial_dim)
            if config.per_step_cnn:
                for k in range(config.seq_len):
                    setattr(self, f"cnn{k}", LocalCNN(patch, rng, config.bn_momentum))
            else:
                self.cnn = LocalCNN(patch, rng, config.bn_momentum)
        self.lstm = LSTM(config.step_width, config.hidden, rng)
        head_in = config.hidden
        if config.uses_semantic:
            self.semantic = SemanticProjection(config.embed_dim, config.semantic_dim, rng)
            head_in += config.semantic_dim
            if config.finetune_embeddings:
                if embeddings is None:
                    raise ConfigError("finetune_embeddings needs the initial embedding table")
                self.embedding = Tensor(np.array(embeddings, dtype=np.float64), requires_grad=True)
        self.head = Dense(head_in, 1, rng)

    def config_dict(self) -> dict:
        return self.config.to_dict()

    def views(self, patches: np.ndarray, contexts: np.ndarray, semantic: np.ndarray | None,
              regions: np.ndarray | None = None) -> tuple[Tensor, Tensor | None]:
        """Return the LSTM output ``h_t`` and projected semantic vector for a batch."""
        cfg = self.config
        b, h = contexts.shape[:2]
        if h != cfg.seq_len:
            raise ShapeError(f"sequence length {h} != configured {cfg.seq_len}")
        if contexts.shape[-1] != cfg.context_dim:
            raise ShapeError(f"context width {contexts.shape[-1]} != configured {cfg.context_dim}")
        parts = []
        if cfg.uses_lcnn:
            s = cfg.patch_size
            if cfg.per_step_cnn:
                steps = [getattr(self, f"cnn{k}")(Tensor(patches[:, k])) for k in range(h)]
                spatial = concat([st.reshape(b, 1, cfg.spatial_dim) for st in steps], axis=1)
            else:
                flat = Tensor(patches.reshape(b * h, s, s, 1))
                spatial = self.cnn(flat).reshape(b, h, cfg.spatial_dim)
            parts.append(spatial)
        elif cfg.uses_neighbors:
            s2 = cfg.patch_size**2
            raw = patches.reshape(b, h, s2)
            parts.append(Tensor(np.delete(raw, s2 // 2, axis=2)))
        parts.append(Tensor(contexts))
        g = concat(parts, axis=-1) if len(parts) > 1 else parts[0]
        h_t = lstm_sequence(g, self.lstm, cfg.seq_len)
        m_hat = None
        if cfg.uses_semantic:
            if cfg.finetune_embeddings:
                m = self.embedding[np.asarray(regions)]
            else:
                m = Tensor(semantic)
            m_hat = self.semantic(m)
        return h_t, m_hat

    def forward_arrays(self, patches, contexts, semantic, regions=None, drop_semantic: bool = False) -> Tensor:
        h_t, m_hat = self.views(patches, contexts, semantic, regions)
        if m_hat is not None:
            if drop_semantic:
                m_hat = m_hat * 0.0
            q = concat([h_t, m_hat], axis=-1)
        else:
            q = h_t
        return self.head(q).sigmoid().reshape(-1)

    def forward_batch(self, samples: SampleSet, idx, drop_semantic: bool = False) -> Tensor:
        idx = np.asarray(idx)
        patches = samples.patches(idx) if (self.config.uses_lcnn or self.config.uses_neighbors) else \
            np.zeros((len(idx), self.config.seq_len, 1, 1, 1))
        return self.forward_arrays(patches, samples.contexts(idx), samples.semantic(idx),
                                   samples.region[idx], drop_semantic)

    def join_width(self) -> int:
        return self.config.hidden + (self.config.semantic_dim if self.config.uses_semantic else 0)


def forward(sample: Sample, model: DMVSTNet) -> float:
    """Predicted normalized demand for one sample (inference mode)."""
    was_training = model.training
    model.eval()
    try:
        out = model.forward_arrays(sample.patches[None], sample.contexts[None],
                                   sample.semantic[None], np.array([sample.region]))
    finally:
        model.train(was_training)
    return float(out.data[0])
