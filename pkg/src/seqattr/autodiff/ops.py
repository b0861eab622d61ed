"""Pure forward implementations for every supported op.

Each function takes the parent values and the op's static params and returns
``(value, ctx)`` where ctx holds whatever the backward rules need.  The tape
and the reference replay both dispatch through OP_FORWARD so a replayed graph
is guaranteed to recompute bit-identically.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import ShapeMismatchError, UnknownOpError

LN_EPS = 1e-5


def _swap_last(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def op_matmul(values, params):
    a, b = values
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeMismatchError("matmul", f"operands must be >=2-d, got {a.shape} x {b.shape}")
    b_eff = _swap_last(b) if params.get("transpose_b", False) else b
    if a.shape[-1] != b_eff.shape[-2]:
        raise ShapeMismatchError("matmul", f"inner dims differ: {a.shape} x {b_eff.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b_eff.shape[:-2])
    except ValueError as e:
        raise ShapeMismatchError("matmul", f"batch dims incompatible: {a.shape} x {b.shape}") from e
    return a @ b_eff, {}


def _check_broadcast(op, a, b):
    if a.shape == b.shape:  # equal shapes always broadcast
        return
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeMismatchError(op, f"cannot broadcast {a.shape} with {b.shape}") from e


def op_add(values, params):
    a, b = values
    _check_broadcast("add", a, b)
    return a + b, {}


def op_mul(values, params):
    a, b = values
    _check_broadcast("mul", a, b)
    return a * b, {}


def op_relu(values, params):
    (x,) = values
    return np.maximum(x, 0.0), {}


def op_sigmoid(values, params):
    (x,) = values
    return expit(x), {}


def op_tanh(values, params):
    (x,) = values
    return np.tanh(x), {}


def op_exp(values, params):
    (x,) = values
    with np.errstate(over="ignore"):
        return np.exp(x), {}


def op_softmax(values, params):
    (x,) = values
    if x.ndim < 1:
        raise ShapeMismatchError("softmax", "input must be at least 1-d")
    shifted = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True), {}


def op_layer_norm(values, params):
    x, gamma, beta = values
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeMismatchError(
            "layer_norm", f"gamma/beta must have shape ({d},), got {gamma.shape}/{beta.shape}"
        )
    mean = np.mean(x, axis=-1, keepdims=True)
    var = np.mean((x - mean) ** 2, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mean) * inv_std
    return xhat * gamma + beta, {"xhat": xhat, "inv_std": inv_std}


def op_embedding_lookup(values, params):
    (table,) = values
    idx = params["indices"]
    if table.ndim != 2:
        raise ShapeMismatchError("embedding_lookup", f"table must be 2-d, got {table.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise ShapeMismatchError(
            "embedding_lookup", f"index out of range for table with {table.shape[0]} rows"
        )
    return table[idx], {}


def op_concat(values, params):
    axis = params["axis"]
    try:
        out = np.concatenate(values, axis=axis)
    except ValueError as e:
        shapes = [v.shape for v in values]
        raise ShapeMismatchError("concat", f"operand shapes incompatible: {shapes}") from e
    return out, {"sizes": [v.shape[axis] for v in values]}


def op_slice(values, params):
    (x,) = values
    axis, start, stop = params["axis"], params["start"], params["stop"]
    n = x.shape[axis]
    if not (0 <= start < stop <= n):
        raise ShapeMismatchError("slice", f"[{start}:{stop}] invalid for axis of length {n}")
    sl = [slice(None)] * x.ndim
    sl[axis] = slice(start, stop)
    return x[tuple(sl)], {}


def _reduce(x, params, fn):
    axis = params.get("axis")
    keepdims = params.get("keepdims", False)
    return fn(x, axis=axis, keepdims=keepdims), {}


def op_sum(values, params):
    return _reduce(values[0], params, np.sum)


def op_mean(values, params):
    return _reduce(values[0], params, np.mean)


OP_FORWARD = {
    "matmul": op_matmul,
    "add": op_add,
    "mul": op_mul,
    "relu": op_relu,
    "sigmoid": op_sigmoid,
    "tanh": op_tanh,
    "exp": op_exp,
    "softmax": op_softmax,
    "layer_norm": op_layer_norm,
    "embedding_lookup": op_embedding_lookup,
    "concat": op_concat,
    "slice": op_slice,
    "sum": op_sum,
    "mean": op_mean,
}

SOURCE_OPS = frozenset({"const", "leaf", "param"})


def run_forward(op: str, values, params):
    try:
        fn = OP_FORWARD[op]
    except KeyError:
        raise UnknownOpError(f"unsupported op {op!r}") from None
    return fn(values, params)
