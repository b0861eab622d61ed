"""Shared network graphs for the three architectures.

Everything here is written against the ctx op surface, so the same code
records a training tape, builds a per-record attribution trace, or evaluates
directly on arrays (see context.py).  Attention softmax nodes are named
"attn:l{layer}:h{head}" so relevance-propagation methods can locate them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data.records import CODE, LAB, FeaturePosition, PatientRecord
from .context import TapeCtx

ATTN_PREFIX = "attn:"
PAD_BIAS = -1e9  # drives padded-key attention weights to exactly zero


def positional_encoding(n_positions: int, dim: int) -> np.ndarray:
    pos = np.arange(n_positions)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    pe = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return pe


@dataclass
class LeafInfo:
    position: FeaturePosition
    node_id: int
    value: np.ndarray
    baseline: np.ndarray


def assemble_batched(ctx, enc: dict):
    """Visit vectors from padded batch arrays; code slots pool by sum."""
    emb = ctx.embedding_lookup(ctx.param("emb/table"), enc["codes"])  # [B,V,C,D]
    emb = ctx.mul(emb, ctx.const(enc["code_mask"][..., None]))
    code_sum = ctx.sum(emb, axis=2)  # [B,V,D]
    labs = ctx.matmul(ctx.const(enc["labs"]), ctx.param("in/W_lab"))
    dt = ctx.matmul(ctx.const(enc["deltas"][..., None]), ctx.param("in/w_dt"))
    return ctx.add(ctx.add(code_sum, labs), dt)


def assemble_trace(
    ctx: TapeCtx, record: PatientRecord, params: dict, lab_fill: float, overrides=None
):
    """Per-record visit vectors with one attribution leaf per feature position.

    Code leaves carry the slot's embedding vector (the pad row is all zero,
    so a masked slot's leaf is the zero vector); lab leaves carry the raw
    scalar.  Leaf order matches record.feature_positions().  overrides maps
    flat feature-grid index -> leaf array and is how interpolated points
    between a record and its reference are traced.
    """
    tape = ctx.tape
    table = params["emb/table"]
    dim = table.shape[1]
    overrides = overrides or {}
    leaves: list[LeafInfo] = []
    code_vecs, lab_vecs = [], []
    zero_vec = np.zeros((1, 1, dim))
    fill = np.full((1, 1, 1), float(lab_fill))

    def make_leaf(k, val, shape):
        if k in overrides:
            val = np.asarray(overrides[k], dtype=np.float64).reshape(shape)
        return val

    for v, codes in enumerate(record.visits):
        slot_ids = []
        for j, c in enumerate(codes):
            val = make_leaf(len(leaves), table[c].reshape(1, 1, dim), (1, 1, dim))
            nid = tape.leaf(val, name=f"leaf:v{v}:code{j}")
            leaves.append(LeafInfo(FeaturePosition(v, CODE, j), nid, val, zero_vec))
            slot_ids.append(nid)
        code_vecs.append(ctx.sum(ctx.concat(slot_ids, axis=1), axis=1, keepdims=True))
        lab_ids = []
        for l, x in enumerate(record.labs[v]):
            val = make_leaf(len(leaves), np.array(float(x)).reshape(1, 1, 1), (1, 1, 1))
            nid = tape.leaf(val, name=f"leaf:v{v}:lab{l}")
            leaves.append(LeafInfo(FeaturePosition(v, LAB, l), nid, val, fill))
            lab_ids.append(nid)
        lab_vecs.append(ctx.concat(lab_ids, axis=2))
    codes_x = ctx.concat(code_vecs, axis=1)  # [1,V,D]
    labs_x = ctx.matmul(ctx.concat(lab_vecs, axis=1), ctx.param("in/W_lab"))
    dt = np.log1p(np.maximum(np.asarray(record.deltas, dtype=np.float64), 0.0))
    dt_x = ctx.matmul(ctx.const(dt.reshape(1, -1, 1)), ctx.param("in/w_dt"))
    visit_x = ctx.add(ctx.add(codes_x, labs_x), dt_x)
    return visit_x, leaves


def _affine(ctx, x, w_key, b_key):
    return ctx.add(ctx.matmul(x, ctx.param(w_key)), ctx.param(b_key))


def multi_head_attention(ctx, x, prefix: str, n_heads: int, attn_bias: np.ndarray, layer: int):
    _, _, dim = ctx.shape(x)
    dk = dim // n_heads
    q = ctx.matmul(x, ctx.param(f"{prefix}/Wq"))
    k = ctx.matmul(x, ctx.param(f"{prefix}/Wk"))
    v = ctx.matmul(x, ctx.param(f"{prefix}/Wv"))
    bias = ctx.const(attn_bias)  # [B,1,V], broadcasts over the query axis
    scale = ctx.const(np.float64(1.0 / np.sqrt(dk)))
    outs = []
    for h in range(n_heads):
        qi = ctx.slice(q, axis=2, start=h * dk, stop=(h + 1) * dk)
        ki = ctx.slice(k, axis=2, start=h * dk, stop=(h + 1) * dk)
        vi = ctx.slice(v, axis=2, start=h * dk, stop=(h + 1) * dk)
        scores = ctx.add(ctx.mul(ctx.matmul(qi, ki, transpose_b=True), scale), bias)
        attn = ctx.softmax(scores, name=f"{ATTN_PREFIX}l{layer}:h{h}")
        outs.append(ctx.matmul(attn, vi))
    return ctx.matmul(ctx.concat(outs, axis=2), ctx.param(f"{prefix}/Wo"))


def masked_mean(ctx, h, visit_mask: np.ndarray):
    pooled = ctx.sum(ctx.mul(h, ctx.const(visit_mask[..., None])), axis=1)  # [B,D]
    recip = 1.0 / np.maximum(visit_mask.sum(axis=1, keepdims=True), 1.0)
    return ctx.mul(pooled, ctx.const(recip))


def transformer_trunk(ctx, visit_x, cfg, visit_mask: np.ndarray, attn_bias: np.ndarray):
    _, n_vis, dim = ctx.shape(visit_x)
    pe = positional_encoding(n_vis, dim)
    h = ctx.add(visit_x, ctx.const(pe[None]))
    for l in range(cfg.n_layers):
        hn = ctx.layer_norm(h, ctx.param(f"tr{l}/ln1/gamma"), ctx.param(f"tr{l}/ln1/beta"))
        h = ctx.add(h, multi_head_attention(ctx, hn, f"tr{l}", cfg.n_heads, attn_bias, layer=l))
        hn = ctx.layer_norm(h, ctx.param(f"tr{l}/ln2/gamma"), ctx.param(f"tr{l}/ln2/beta"))
        ff = _affine(ctx, ctx.relu(_affine(ctx, hn, f"tr{l}/ff/W1", f"tr{l}/ff/b1")), f"tr{l}/ff/W2", f"tr{l}/ff/b2")
        h = ctx.add(h, ff)
    h = ctx.layer_norm(h, ctx.param("ln_f/gamma"), ctx.param("ln_f/beta"))
    return masked_mean(ctx, h, visit_mask)


def stage_cell_sweep(ctx, visit_x, cfg, deltas: np.ndarray, visit_mask: np.ndarray):
    """Gated recurrence with exponential time decay on the update gate.

    State stays [B,1,H] throughout so no reshapes are needed; pad steps are
    frozen by the visit mask.  Returns all states stacked to [B,V,H].
    """
    batch, n_vis, _ = ctx.shape(visit_x)
    hidden = cfg.hidden_dim
    h = ctx.const(np.zeros((batch, 1, hidden)))
    neg1 = ctx.const(np.float64(-1.0))
    inv_tau = ctx.exp(ctx.mul(ctx.param("cell/rho"), neg1))  # 1/tau, tau = exp(rho) > 0
    states = []
    for t in range(n_vis):
        x_t = ctx.slice(visit_x, axis=1, start=t, stop=t + 1)
        z = ctx.sigmoid(_cell_affine(ctx, x_t, h, "z"))
        decay = ctx.exp(ctx.mul(ctx.const(-deltas[:, t : t + 1, None]), inv_tau))
        zt = ctx.mul(z, decay)
        r = ctx.sigmoid(_cell_affine(ctx, x_t, h, "r"))
        rh = ctx.mul(r, h, gate="left", gate_name="reset-gate")
        c = ctx.tanh(_cell_affine(ctx, x_t, rh, "c"))
        upd = ctx.mul(zt, ctx.add(c, ctx.mul(h, neg1)), gate="left", gate_name="update-gate")
        m = ctx.const(visit_mask[:, t : t + 1, None])
        h = ctx.add(h, ctx.mul(m, upd))
        states.append(h)
    return ctx.concat(states, axis=1)


def _cell_affine(ctx, x_t, h, g: str):
    xw = ctx.matmul(x_t, ctx.param(f"cell/W{g}"))
    hu = ctx.matmul(h, ctx.param(f"cell/U{g}"))
    return ctx.add(ctx.add(xw, hu), ctx.param(f"cell/b{g}"))


def _last_state(ctx, states, visit_mask: np.ndarray):
    idx = visit_mask.sum(axis=1).astype(int) - 1
    onehot = np.zeros(visit_mask.shape)
    onehot[np.arange(len(idx)), idx] = 1.0
    return ctx.sum(ctx.mul(states, ctx.const(onehot[..., None])), axis=1)  # [B,H]


def logits_graph(ctx, visit_x, cfg, visit_mask: np.ndarray, deltas: np.ndarray):
    """visit vectors -> class logits for the configured architecture."""
    attn_bias = ((1.0 - visit_mask) * PAD_BIAS)[:, None, :]
    if cfg.arch == "transformer":
        pooled = transformer_trunk(ctx, visit_x, cfg, visit_mask, attn_bias)
    elif cfg.arch == "stage-recurrent":
        states = stage_cell_sweep(ctx, visit_x, cfg, deltas, visit_mask)
        pooled = _last_state(ctx, states, visit_mask)
    elif cfg.arch == "stage-attn":
        states = stage_cell_sweep(ctx, visit_x, cfg, deltas, visit_mask)
        attn = multi_head_attention(ctx, states, "sa", cfg.n_heads, attn_bias, layer=0)
        mixed = ctx.layer_norm(
            ctx.add(states, attn), ctx.param("sa/ln/gamma"), ctx.param("sa/ln/beta")
        )
        pooled = masked_mean(ctx, mixed, visit_mask)
    else:
        raise ValueError(f"unknown arch {cfg.arch!r}")
    return ctx.add(ctx.matmul(pooled, ctx.param("head/W")), ctx.param("head/b"))
