"""Reverse-mode walk over a recorded tape.

Three gradient policies share one engine:

* ``standard``          classic chain rule.
* ``deeplift-rescale``  difference-from-reference multipliers at nonlinear
                        ops, symmetric midpoint rule at bilinear ops; linear
                        ops keep the chain rule.  Satisfies
                        sum(attr) == F(x) - F(x_ref) exactly over this op set.
* ``gim``               chain rule with three local substitutions: a
                        temperature-scaled softmax Jacobian, frozen
                        mean/variance through layer norm (only when the
                        temperature is active), and full gradient rerouting
                        around flagged multiplicative gates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import MissingReferenceError, ShapeMismatchError, UnknownOpError
from .counters import bump_backward
from .ops import SOURCE_OPS, run_forward
from .tape import Tape, TapeNode

MODES = ("standard", "deeplift-rescale", "gim")

# Positions where |dx| falls below this use the local derivative instead of
# the difference quotient.
RESCALE_EPS = 1e-7


@dataclass
class ReferenceActivations:
    """Values of every tape node under the reference input."""

    values: dict[int, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, node_id: int) -> np.ndarray:
        try:
            return self.values[node_id]
        except KeyError:
            raise MissingReferenceError(f"no reference activation for node {node_id}") from None


@dataclass(frozen=True)
class BackwardPolicy:
    mode: str = "standard"
    temperature: float = 1.0
    gate_flags: frozenset = frozenset()
    references: Optional[ReferenceActivations] = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "deeplift-rescale" and self.references is None:
            raise MissingReferenceError("deeplift-rescale requires reference activations")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


def record_reference_pass(tape: Tape, leaf_values) -> ReferenceActivations:
    """Replay the tape with leaves swapped for reference values.

    leaf_values is either a dict {leaf_id: array} or a sequence aligned with
    tape.leaf_ids.  const and param nodes keep their recorded values.
    """
    if not isinstance(leaf_values, dict):
        if len(leaf_values) != len(tape.leaf_ids):
            raise ShapeMismatchError(
                "reference", f"expected {len(tape.leaf_ids)} leaf values, got {len(leaf_values)}"
            )
        leaf_values = dict(zip(tape.leaf_ids, leaf_values))
    vals: dict[int, np.ndarray] = {}
    for node in tape.nodes:
        if node.op == "leaf":
            if node.id not in leaf_values:
                raise MissingReferenceError(f"no reference value for leaf {node.id}")
            v = np.ascontiguousarray(leaf_values[node.id], dtype=np.float64)
            if v.shape != node.value.shape:
                raise ShapeMismatchError(
                    "reference", f"leaf {node.id}: shape {v.shape} != recorded {node.value.shape}"
                )
            vals[node.id] = v
        elif node.op in SOURCE_OPS:
            vals[node.id] = node.value
        else:
            v, _ = run_forward(node.op, [vals[p] for p in node.parents], node.params)
            if not np.all(np.isfinite(v)):
                raise ShapeMismatchError("reference", f"non-finite reference at node {node.id}")
            vals[node.id] = v
    return ReferenceActivations(values=vals)


def unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum g down to the given shape (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _swap(a):
    return np.swapaxes(a, -1, -2)


def _rescale(dx, dy, local):
    """Elementwise dy/dx with a local-derivative fallback near dx == 0."""
    small = np.abs(dx) < RESCALE_EPS
    safe = np.where(small, 1.0, dx)
    return np.where(small, local, dy / safe)


def _softmax_vjp(g, s):
    return s * (g - np.sum(g * s, axis=-1, keepdims=True))


def _ln_local_diag(gamma, inv_std, xhat):
    n = xhat.shape[-1]
    return gamma * inv_std * (1.0 - 1.0 / n - xhat * xhat / n)


def _axes_tuple(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        return (axis % ndim,)
    return tuple(a % ndim for a in axis)


def _expand_reduced(g, in_shape, params):
    axes = _axes_tuple(params.get("axis"), len(in_shape))
    if not params.get("keepdims", False):
        for ax in sorted(axes):
            g = np.expand_dims(g, ax)
    return g, axes


def _node_backward(node: TapeNode, g: np.ndarray, parent_values, policy: BackwardPolicy, needs):
    """Gradient contributions for each parent slot of one node.

    ``needs`` flags which parent slots can still reach a requested node;
    slots that cannot return None so their (possibly expensive) contribution
    is never materialized.
    """
    op = node.op
    mode = policy.mode
    refs = policy.references

    # Most frequent ops first: wide graphs are dominated by per-feature
    # concat/reduce plumbing, not by the dense math.
    if op == "concat":
        axis = node.params["axis"]
        sizes = node.ctx["sizes"]
        out, start = [], 0
        for k, size in enumerate(sizes):
            if needs[k]:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(start, start + size)
                out.append(g[tuple(sl)])
            else:
                out.append(None)
            start += size
        return out

    if op in ("sum", "mean"):
        (x,) = parent_values
        ge, axes = _expand_reduced(g, x.shape, node.params)
        if op == "mean":
            count = 1
            for ax in axes:
                count *= x.shape[ax]
            ge = ge / count
        return [np.broadcast_to(ge, x.shape)]

    if op == "add":
        a, b = parent_values
        return [
            unbroadcast(g, a.shape) if needs[0] else None,
            unbroadcast(g, b.shape) if needs[1] else None,
        ]

    if op == "mul":
        a, b = parent_values
        gate = node.params.get("gate")
        if (
            mode == "gim"
            and gate is not None
            and node.params.get("gate_name") in policy.gate_flags
        ):
            # Reroute: the gate operand gets nothing, the signal operand gets
            # the full incoming gradient, undamped by the gate's value.
            if gate == "left":
                return [np.zeros_like(a) if needs[0] else None,
                        unbroadcast(g, b.shape) if needs[1] else None]
            return [unbroadcast(g, a.shape) if needs[0] else None,
                    np.zeros_like(b) if needs[1] else None]
        if mode == "deeplift-rescale":
            ga = gb = None
            if needs[0]:
                bm = 0.5 * (b + refs[node.parents[1]])
                ga = unbroadcast(g * bm, a.shape)
            if needs[1]:
                am = 0.5 * (a + refs[node.parents[0]])
                gb = unbroadcast(g * am, b.shape)
            return [ga, gb]
        return [
            unbroadcast(g * b, a.shape) if needs[0] else None,
            unbroadcast(g * a, b.shape) if needs[1] else None,
        ]

    if op == "matmul":
        a, b = parent_values
        tb = node.params.get("transpose_b", False)
        b_eff = _swap(b) if tb else b
        if mode == "deeplift-rescale":
            a_use = 0.5 * (a + refs[node.parents[0]])
            b_ref = refs[node.parents[1]]
            b_use = 0.5 * (b_eff + (_swap(b_ref) if tb else b_ref))
        else:
            a_use, b_use = a, b_eff
        ga = unbroadcast(g @ _swap(b_use), a.shape) if needs[0] else None
        if needs[1]:
            gb_eff = unbroadcast(_swap(a_use) @ g, b_eff.shape)
            gb = _swap(gb_eff) if tb else gb_eff
        else:
            gb = None
        return [ga, gb]

    if op in ("relu", "sigmoid", "tanh", "exp"):
        (x,) = parent_values
        y = node.value
        if op == "relu":
            local = (x > 0).astype(np.float64)
        elif op == "sigmoid":
            local = y * (1.0 - y)
        elif op == "tanh":
            local = 1.0 - y * y
        else:
            local = y
        if mode == "deeplift-rescale":
            dx = x - refs[node.parents[0]]
            dy = y - refs[node.id]
            return [g * _rescale(dx, dy, local)]
        return [g * local]

    if op == "softmax":
        (x,) = parent_values
        y = node.value
        if mode == "deeplift-rescale":
            dx = x - refs[node.parents[0]]
            dy = y - refs[node.id]
            return [g * _rescale(dx, dy, y * (1.0 - y))]
        if mode == "gim":
            t = policy.temperature
            s, _ = run_forward("softmax", [x / t], {})
            return [_softmax_vjp(g, s) / t]
        return [_softmax_vjp(g, y)]

    if op == "layer_norm":
        x, gamma, beta = parent_values
        xhat = node.ctx["xhat"]
        inv_std = node.ctx["inv_std"]
        flat = lambda a: a.reshape(-1, a.shape[-1]).sum(axis=0)  # noqa: E731
        g_gamma = flat(g * xhat) if needs[1] else None
        g_beta = flat(g) if needs[2] else None
        if not needs[0]:
            gx = None
        elif mode == "deeplift-rescale":
            dx = x - refs[node.parents[0]]
            dy = node.value - refs[node.id]
            gx = g * _rescale(dx, dy, _ln_local_diag(gamma, inv_std, xhat))
        elif mode == "gim" and policy.temperature != 1.0:
            # Frozen statistics: treat mean and variance as constants.
            gx = g * gamma * inv_std
        else:
            gh = g * gamma
            gx = inv_std * (
                gh
                - np.mean(gh, axis=-1, keepdims=True)
                - xhat * np.mean(gh * xhat, axis=-1, keepdims=True)
            )
        return [gx, g_gamma, g_beta]

    if op == "embedding_lookup":
        (table,) = parent_values
        idx = node.params["indices"]
        gt = np.zeros_like(table)
        np.add.at(gt, idx.ravel(), g.reshape(-1, table.shape[1]))
        return [gt]

    if op == "slice":
        (x,) = parent_values
        gx = np.zeros_like(x)
        sl = [slice(None)] * x.ndim
        sl[node.params["axis"]] = slice(node.params["start"], node.params["stop"])
        gx[tuple(sl)] = g
        return [gx]

    raise UnknownOpError(f"no backward rule for op {op!r}")


def backward(
    tape: Tape,
    output_id: int,
    policy: Optional[BackwardPolicy] = None,
    seed: Optional[np.ndarray] = None,
    wrt=None,
) -> dict[int, np.ndarray]:
    """Walk the tape in reverse from output_id.

    Returns {node_id: gradient} for the requested nodes (default: all leaves
    and params), with zeros for nodes the output does not depend on.  seed is
    the upstream gradient at the output; it defaults to ones and is required
    to be explicit when the output is not size-1.
    """
    policy = policy or BackwardPolicy()
    out_node = tape.nodes[output_id]
    if seed is None:
        if out_node.value.size != 1:
            raise ShapeMismatchError(
                "backward", f"output node has shape {out_node.value.shape}; pass an explicit seed"
            )
        seed = np.ones_like(out_node.value)
    else:
        seed = np.asarray(seed, dtype=np.float64)
        if seed.shape != out_node.value.shape:
            raise ShapeMismatchError(
                "backward", f"seed shape {seed.shape} != output shape {out_node.value.shape}"
            )
    if policy.mode == "deeplift-rescale":
        refs = policy.references
        for node in tape.nodes[: output_id + 1]:
            if node.id not in refs.values:
                raise MissingReferenceError(
                    f"reference activations missing node {node.id} ({node.op})"
                )

    if wrt is None:
        wrt = list(tape.leaf_ids) + list(tape.param_ids)

    # Per-parent gradient work is gated on reachability: a slot only gets a
    # contribution when some requested node lies at or below it.  The masks
    # depend only on graph structure, so they are cached on the tape (replay
    # keeps structure fixed; apply only appends, leaving the prefix valid).
    # needs_list[nid] is the per-parent mask, or None when the node either is
    # a source or has no parent worth following.
    nodes = tape.nodes
    cache_key = (output_id, tuple(wrt))
    cached = tape._reach_cache.get(cache_key)
    if cached is None:
        wrt_set = set(wrt)
        reach = [False] * (output_id + 1)
        needs_list: list = [None] * (output_id + 1)
        for nid in range(output_id + 1):
            parents = nodes[nid].parents
            reach[nid] = nid in wrt_set or any(reach[p] for p in parents)
            if parents:
                t = tuple(reach[p] for p in parents)
                if any(t):
                    needs_list[nid] = t
        tape._reach_cache[cache_key] = needs_list
    else:
        needs_list = cached

    bump_backward()
    grads: list = [None] * (output_id + 1)
    grads[output_id] = seed
    for nid in range(output_id, -1, -1):
        g = grads[nid]
        if g is None:
            continue
        needs = needs_list[nid]
        if needs is None:
            continue
        node = nodes[nid]
        if node.op == "concat":
            parent_values = None  # concat backward only reads recorded sizes
        else:
            parent_values = [nodes[p].value for p in node.parents]
        contribs = _node_backward(node, g, parent_values, policy, needs)
        for pid, c in zip(node.parents, contribs):
            if c is not None:
                prev = grads[pid]
                grads[pid] = c if prev is None else prev + c

    return {
        i: np.asarray(grads[i])
        if i <= output_id and grads[i] is not None
        else np.zeros_like(nodes[i].value)
        for i in wrt
    }
