from .base import (
    ARCHS,
    ModelConfig,
    SequenceClassifier,
    TraceResult,
    build_model,
    init_params,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .context import ArrayCtx, TapeCtx
from .metrics import EvalMetrics, evaluate
from .nets import ATTN_PREFIX, LeafInfo
from .training import train_loop


def train(model, records, y=None) -> "EvalMetrics":
    """Fit in place and return held-out metrics from the internal split."""
    model.fit(records, y)
    return model.train_metrics_


__all__ = [
    "ARCHS",
    "ModelConfig",
    "SequenceClassifier",
    "TraceResult",
    "build_model",
    "init_params",
    "load_checkpoint",
    "save_checkpoint",
    "ArrayCtx",
    "TapeCtx",
    "EvalMetrics",
    "evaluate",
    "ATTN_PREFIX",
    "LeafInfo",
    "train",
    "train_loop",
]
