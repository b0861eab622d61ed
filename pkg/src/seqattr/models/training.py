"""RMSProp training with class-weighted cross entropy.

The loss and its logit gradient are computed in plain numpy and the gradient
is injected as the backward seed at the logits node, so the tape only ever
carries the forward graph.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import backward, bump_forward
from ..data.records import PAD_CODE
from ..errors import NumericOverflowError, TrainingDivergedError
from .context import TapeCtx
from .nets import assemble_batched, logits_graph

RMS_DECAY = 0.9
RMS_EPS = 1e-8


def class_weights(labels: np.ndarray, n_classes: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=n_classes)
    if (counts == 0).any():
        missing = np.where(counts == 0)[0].tolist()
        raise ValueError(f"training split lacks classes {missing}; enlarge the corpus")
    return len(labels) / (n_classes * counts.astype(np.float64))


def _softmax_rows(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def weighted_ce_and_grad(logits, y, sample_w):
    """Loss and d(loss)/d(logits) for weighted cross entropy."""
    p = _softmax_rows(logits)
    n = len(y)
    z_norm = sample_w.sum()
    picked = np.clip(p[np.arange(n), y], 1e-12, None)
    loss = -(sample_w * np.log(picked)).sum() / z_norm
    d = p.copy()
    d[np.arange(n), y] -= 1.0
    d *= (sample_w / z_norm)[:, None]
    return loss, d


def train_loop(model, records, labels):
    """Returns (history, held-out EvalMetrics); mutates model.params_ in place."""
    from .metrics import evaluate

    cfg = model.config
    rng = np.random.default_rng(model.seed)
    n = len(records)
    order = rng.permutation(n)
    n_val = int(round(n * model.val_fraction)) if model.val_fraction > 0 else 0
    val_idx, tr_idx = order[:n_val], order[n_val:]
    if len(tr_idx) == 0:
        raise ValueError("no training records left after the validation split")
    weights = class_weights(labels[tr_idx], cfg.n_classes)
    cache = {k: np.zeros_like(v) for k, v in model.params_.items()}
    history = []
    for epoch in range(model.epochs):
        perm = rng.permutation(tr_idx)
        total, seen = 0.0, 0
        for start in range(0, len(perm), model.batch_size):
            bidx = perm[start : start + model.batch_size]
            brecs = [records[i] for i in bidx]
            by = labels[bidx]
            enc = model._encode(brecs)
            ctx = TapeCtx(model.params_)
            bump_forward()
            try:
                visit_x = assemble_batched(ctx, enc)
                logits_id = logits_graph(ctx, visit_x, cfg, enc["visit_mask"], enc["deltas"])
            except NumericOverflowError as e:
                raise TrainingDivergedError(f"forward overflow at epoch {epoch}: {e}") from e
            logits = ctx.tape.value(logits_id)
            loss, dlogits = weighted_ce_and_grad(logits, by, weights[by])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss became non-finite at epoch {epoch}")
            name_by_node = {nid: k for k, nid in ctx._param_nodes.items()}
            grads = backward(ctx.tape, logits_id, seed=dlogits, wrt=list(name_by_node))
            for nid, g in grads.items():
                k = name_by_node[nid]
                cache[k] = RMS_DECAY * cache[k] + (1.0 - RMS_DECAY) * g * g
                model.params_[k] -= model.lr * g / (np.sqrt(cache[k]) + RMS_EPS)
            model.params_["emb/table"][PAD_CODE] = 0.0  # pad row stays zero
            total += loss * len(bidx)
            seen += len(bidx)
        history.append({"epoch": epoch, "loss": total / seen})
    val_metrics = None
    if n_val:
        val_metrics = evaluate(model, [records[i] for i in val_idx], labels[val_idx])
    return history, val_metrics
