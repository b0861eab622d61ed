"""Sequence classifier estimator.

One sklearn-style estimator covers the three architectures; the arch field
selects the trunk.  fit/predict/predict_proba follow the usual conventions
(records carry their own labels, y overrides them when given) and trace()
exposes the recorded attribution graph for a single record.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..autodiff import Tape, bump_forward
from ..data.records import PAD_CODE, PatientRecord, encode_batch
from ..validation import check_records
from .context import ArrayCtx, TapeCtx
from .nets import LeafInfo, assemble_batched, assemble_trace, logits_graph

ARCHS = ("transformer", "stage-recurrent", "stage-attn")

DEFAULT_LAB_FILL = 0.0


@dataclass(frozen=True)
class ModelConfig:
    arch: str = "transformer"
    vocab_size: int = 120
    n_labs: int = 5
    n_classes: int = 2
    embed_dim: int = 64
    hidden_dim: int = 64
    n_layers: int = 2
    n_heads: int = 4
    ff_dim: int = 128
    max_visits: int = 32
    max_codes: int = 8

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if self.arch == "transformer" and self.embed_dim % self.n_heads:
            raise ValueError("embed_dim must be divisible by n_heads")
        if self.arch == "stage-attn" and self.hidden_dim % self.n_heads:
            raise ValueError("hidden_dim must be divisible by n_heads")
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TraceResult:
    """A recorded forward pass of one record."""

    tape: Tape
    logits_id: int
    leaves: list  # list[LeafInfo], ordered like record.feature_positions()
    logits: np.ndarray  # [n_classes]
    pred_class: int


def _glorot(rng, shape):
    fan_in, fan_out = shape[0], shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(cfg: ModelConfig, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    p: dict[str, np.ndarray] = {}
    emb = rng.normal(0.0, 0.1, size=(cfg.vocab_size, cfg.embed_dim))
    emb[PAD_CODE] = 0.0  # pad embeds to the zero vector, always
    p["emb/table"] = emb
    p["in/W_lab"] = _glorot(rng, (cfg.n_labs, cfg.embed_dim))
    p["in/w_dt"] = _glorot(rng, (1, cfg.embed_dim))
    d = cfg.embed_dim
    if cfg.arch == "transformer":
        for l in range(cfg.n_layers):
            for w in ("Wq", "Wk", "Wv", "Wo"):
                p[f"tr{l}/{w}"] = _glorot(rng, (d, d))
            for ln in ("ln1", "ln2"):
                p[f"tr{l}/{ln}/gamma"] = np.ones(d)
                p[f"tr{l}/{ln}/beta"] = np.zeros(d)
            p[f"tr{l}/ff/W1"] = _glorot(rng, (d, cfg.ff_dim))
            p[f"tr{l}/ff/b1"] = np.zeros(cfg.ff_dim)
            p[f"tr{l}/ff/W2"] = _glorot(rng, (cfg.ff_dim, d))
            p[f"tr{l}/ff/b2"] = np.zeros(d)
        p["ln_f/gamma"] = np.ones(d)
        p["ln_f/beta"] = np.zeros(d)
        head_in = d
    else:
        h = cfg.hidden_dim
        for g in ("z", "r", "c"):
            p[f"cell/W{g}"] = _glorot(rng, (d, h))
            p[f"cell/U{g}"] = _glorot(rng, (h, h))
            p[f"cell/b{g}"] = np.zeros(h)
        p["cell/rho"] = np.zeros((1, 1))
        if cfg.arch == "stage-attn":
            for w in ("Wq", "Wk", "Wv", "Wo"):
                p[f"sa/{w}"] = _glorot(rng, (h, h))
            p["sa/ln/gamma"] = np.ones(h)
            p["sa/ln/beta"] = np.zeros(h)
        head_in = h
    p["head/W"] = _glorot(rng, (head_in, cfg.n_classes))
    p["head/b"] = np.zeros(cfg.n_classes)
    return p


class SequenceClassifier(BaseEstimator, ClassifierMixin):
    """Visit-sequence classifier with a traceable forward pass.

    Training hyperparameters ride on the estimator so get_params/set_params
    and clone() see them.  fit() trains with class-weighted cross entropy on
    an RMSProp loop (see training.py).
    """

    def __init__(
        self,
        arch: str = "transformer",
        vocab_size: int = 120,
        n_labs: int = 5,
        n_classes: int = 2,
        embed_dim: int = 64,
        hidden_dim: int = 64,
        n_layers: int = 2,
        n_heads: int = 4,
        ff_dim: int = 128,
        max_visits: int = 32,
        max_codes: int = 8,
        epochs: int = 10,
        batch_size: int = 64,
        lr: float = 1e-3,
        val_fraction: float = 0.1,
        lab_fill: float = DEFAULT_LAB_FILL,
        seed: int = 0,
    ):
        self.arch = arch
        self.vocab_size = vocab_size
        self.n_labs = n_labs
        self.n_classes = n_classes
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.n_layers = n_layers
        self.n_heads = n_heads
        self.ff_dim = ff_dim
        self.max_visits = max_visits
        self.max_codes = max_codes
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.val_fraction = val_fraction
        self.lab_fill = lab_fill
        self.seed = seed

    @property
    def config(self) -> ModelConfig:
        return ModelConfig(
            arch=self.arch,
            vocab_size=self.vocab_size,
            n_labs=self.n_labs,
            n_classes=self.n_classes,
            embed_dim=self.embed_dim,
            hidden_dim=self.hidden_dim,
            n_layers=self.n_layers,
            n_heads=self.n_heads,
            ff_dim=self.ff_dim,
            max_visits=self.max_visits,
            max_codes=self.max_codes,
        )

    def initialize(self) -> "SequenceClassifier":
        """Fresh seeded parameters without training (probes, timing, tests)."""
        self.params_ = init_params(self.config, self.seed)
        self.classes_ = np.arange(self.n_classes)
        return self

    # -- training ----------------------------------------------------------
    def fit(self, records, y=None):
        from .training import train_loop  # late import to avoid a cycle

        records = check_records(records)
        labels = np.asarray([r.label for r in records] if y is None else y, dtype=int)
        if len(labels) != len(records):
            raise ValueError("y length does not match records")
        cfg = self.config
        if labels.min() < 0 or labels.max() >= cfg.n_classes:
            raise ValueError("labels outside [0, n_classes)")
        self.initialize()
        self.history_, self.train_metrics_ = train_loop(self, records, labels)
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise RuntimeError("model is not fitted; call fit() or load a checkpoint")

    # -- inference ---------------------------------------------------------
    def _encode(self, records):
        cfg = self.config
        return encode_batch(records, cfg.max_visits, cfg.max_codes, cfg.n_labs)

    def _forward_arrays(self, enc: dict) -> np.ndarray:
        ctx = ArrayCtx(self.params_)
        bump_forward()
        visit_x = assemble_batched(ctx, enc)
        return logits_graph(ctx, visit_x, self.config, enc["visit_mask"], enc["deltas"])

    def decision_function(self, records) -> np.ndarray:
        self._check_fitted()
        records = check_records(records)
        out = []
        for i in range(0, len(records), 256):
            out.append(self._forward_arrays(self._encode(records[i : i + 256])))
        return np.concatenate(out, axis=0)

    def predict_proba(self, records) -> np.ndarray:
        logits = self.decision_function(records)
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def predict(self, records) -> np.ndarray:
        return self.predict_proba(records).argmax(axis=1)

    def predict_proba_record(self, record: PatientRecord) -> np.ndarray:
        """Single-record probabilities; the black-box unit of work."""
        self._check_fitted()
        logits = self._forward_arrays(self._encode([record]))[0]
        z = logits - logits.max()
        e = np.exp(z)
        return e / e.sum()

    # -- tracing -----------------------------------------------------------
    def trace(self, record: PatientRecord, leaf_values: Optional[dict] = None) -> TraceResult:
        """Record the forward pass of one record on a fresh tape.

        The trace is pad-free: the graph is built at the record's true length
        (clipped to max_visits, keeping the most recent visits).  leaf_values
        optionally overrides leaf arrays by feature-grid index, which is how
        interpolated inputs are traced.
        """
        self._check_fitted()
        cfg = self.config
        record = _clip_record(record, cfg.max_visits, cfg.max_codes)
        ctx = TapeCtx(self.params_)
        bump_forward()
        visit_x, leaves = assemble_trace(
            ctx, record, self.params_, self.lab_fill, overrides=leaf_values
        )
        n_vis = record.n_visits
        vmask = np.ones((1, n_vis))
        dts = np.log1p(np.maximum(np.asarray(record.deltas), 0.0)).reshape(1, -1)
        logits_id = logits_graph(ctx, visit_x, cfg, vmask, dts)
        logits = ctx.tape.value(logits_id)[0]
        return TraceResult(
            tape=ctx.tape,
            logits_id=logits_id,
            leaves=leaves,
            logits=logits,
            pred_class=int(np.argmax(logits)),
        )


def _clip_record(record: PatientRecord, max_visits: int, max_codes: int) -> PatientRecord:
    if record.n_visits <= max_visits and all(len(v) <= max_codes for v in record.visits):
        return record
    out = record.copy()
    out.visits = [v[:max_codes] for v in out.visits[-max_visits:]]
    out.labs = out.labs[-max_visits:]
    out.deltas = out.deltas[-max_visits:]
    return out


def build_model(config, seed: int = 0, **training_kwargs) -> SequenceClassifier:
    """Factory: a ModelConfig (or its dict form) plus seed -> estimator."""
    if isinstance(config, dict):
        config = ModelConfig(**config)
    return SequenceClassifier(
        arch=config.arch,
        vocab_size=config.vocab_size,
        n_labs=config.n_labs,
        n_classes=config.n_classes,
        embed_dim=config.embed_dim,
        hidden_dim=config.hidden_dim,
        n_layers=config.n_layers,
        n_heads=config.n_heads,
        ff_dim=config.ff_dim,
        max_visits=config.max_visits,
        max_codes=config.max_codes,
        seed=seed,
        **training_kwargs,
    )
