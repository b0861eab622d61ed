"""Flat-list computation tape.

A Tape records every intermediate as a TapeNode holding the op kind, the
realized float64 value, parent ids, and static params.  Graphs are built in
topological order by construction, so the backward walk is a single reverse
sweep with no sorting step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import isfinite
from typing import Any, Optional, Sequence

import numpy as np

from ..errors import NumericOverflowError, ShapeMismatchError
from .ops import SOURCE_OPS, run_forward


@dataclass
class TapeNode:
    id: int
    op: str
    value: np.ndarray
    parents: tuple = ()
    params: dict = field(default_factory=dict)
    ctx: dict = field(default_factory=dict)
    name: Optional[str] = None


class Tape:
    """Records a forward computation for later reverse-mode walks."""

    def __init__(self):
        self.nodes: list[TapeNode] = []
        self.leaf_ids: list[int] = []
        self.param_ids: list[int] = []
        # Reachability masks computed by backward(), keyed by
        # (output_id, wrt tuple).  Structure never mutates in place, so
        # entries stay valid for the tape's lifetime.
        self._reach_cache: dict = {}
        # Replay caches: compute-order node list (invalidated when apply()
        # appends) and source ids already validated as overridable.
        self._compute_cache: Optional[list] = None
        self._replay_sources: set = set()

    def __len__(self) -> int:
        return len(self.nodes)

    def value(self, node_id: int) -> np.ndarray:
        return self.nodes[node_id].value

    def node(self, node_id: int) -> TapeNode:
        return self.nodes[node_id]

    def _source(self, op: str, value, name: Optional[str]) -> int:
        arr = np.ascontiguousarray(value, dtype=np.float64)
        node = TapeNode(id=len(self.nodes), op=op, value=arr, name=name)
        self.nodes.append(node)
        return node.id

    def const(self, value, name: Optional[str] = None) -> int:
        return self._source("const", value, name)

    def leaf(self, value, name: Optional[str] = None) -> int:
        nid = self._source("leaf", value, name)
        self.leaf_ids.append(nid)
        return nid

    def param(self, value, name: Optional[str] = None) -> int:
        nid = self._source("param", value, name)
        self.param_ids.append(nid)
        return nid

    def apply(self, op: str, parents: Sequence[int], name: Optional[str] = None, **params) -> int:
        """Run one op forward and append the result node."""
        values = [self.nodes[p].value for p in parents]
        value, ctx = run_forward(op, values, params)
        nid = len(self.nodes)
        if not np.all(np.isfinite(value)):
            raise NumericOverflowError(op, nid)
        self.nodes.append(
            TapeNode(id=nid, op=op, value=value, parents=tuple(parents), params=params, ctx=ctx, name=name)
        )
        self._compute_cache = None
        return nid

    def replay(self, overrides: dict) -> None:
        """Recompute every node in place with replacement source values.

        ``overrides`` maps source node ids to new values.  Ops, parents, and
        static params are untouched, so the refreshed tape is exactly what
        apply() would have recorded from scratch on the new inputs — without
        paying graph construction again (path methods re-evaluate one record
        many times).
        """
        nodes = self.nodes
        checked = self._replay_sources
        for nid, val in overrides.items():
            node = nodes[nid]
            if nid not in checked:
                if node.op not in SOURCE_OPS:
                    raise ValueError(f"node {nid} is {node.op!r}, not a source")
                checked.add(nid)
            arr = np.ascontiguousarray(val, dtype=np.float64)
            if arr.shape != node.value.shape:
                raise ShapeMismatchError(
                    "replay", f"node {nid}: shape {arr.shape} != recorded {node.value.shape}"
                )
            node.value = arr
        compute = self._compute_cache
        if compute is None:
            compute = self._compute_cache = [n for n in nodes if n.op not in SOURCE_OPS]
        for node in compute:
            value, ctx = run_forward(node.op, [nodes[p].value for p in node.parents], node.params)
            # same overflow guard as apply(); the scalar reduction is cheaper
            # than a full isfinite map and inf/nan always propagate through it
            if not isfinite(value.sum()):
                raise NumericOverflowError(node.op, node.id)
            node.value = value
            node.ctx = ctx

    # Thin wrappers so model code reads like math.
    def matmul(self, a: int, b: int, transpose_b: bool = False, name=None) -> int:
        return self.apply("matmul", (a, b), name=name, transpose_b=transpose_b)

    def add(self, a: int, b: int, name=None) -> int:
        return self.apply("add", (a, b), name=name)

    def mul(self, a: int, b: int, gate: Optional[str] = None, gate_name: Optional[str] = None, name=None) -> int:
        # gate marks one operand ("left"/"right") as a saturating gate; backward
        # policies may reroute gradient around it.
        params: dict[str, Any] = {}
        if gate is not None:
            if gate not in ("left", "right"):
                raise ValueError("gate must be 'left' or 'right'")
            params["gate"] = gate
            params["gate_name"] = gate_name
        return self.apply("mul", (a, b), name=name, **params)

    def relu(self, a: int, name=None) -> int:
        return self.apply("relu", (a,), name=name)

    def sigmoid(self, a: int, name=None) -> int:
        return self.apply("sigmoid", (a,), name=name)

    def tanh(self, a: int, name=None) -> int:
        return self.apply("tanh", (a,), name=name)

    def exp(self, a: int, name=None) -> int:
        return self.apply("exp", (a,), name=name)

    def softmax(self, a: int, name=None) -> int:
        return self.apply("softmax", (a,), name=name)

    def layer_norm(self, x: int, gamma: int, beta: int, name=None) -> int:
        return self.apply("layer_norm", (x, gamma, beta), name=name)

    def embedding_lookup(self, table: int, indices, name=None) -> int:
        idx = np.asarray(indices, dtype=np.int64)
        return self.apply("embedding_lookup", (table,), name=name, indices=idx)

    def concat(self, ids: Sequence[int], axis: int, name=None) -> int:
        return self.apply("concat", tuple(ids), name=name, axis=axis)

    def slice(self, a: int, axis: int, start: int, stop: int, name=None) -> int:
        return self.apply("slice", (a,), name=name, axis=axis, start=start, stop=stop)

    def sum(self, a: int, axis=None, keepdims: bool = False, name=None) -> int:
        return self.apply("sum", (a,), name=name, axis=axis, keepdims=keepdims)

    def mean(self, a: int, axis=None, keepdims: bool = False, name=None) -> int:
        return self.apply("mean", (a,), name=name, axis=axis, keepdims=keepdims)

    def find(self, name: str) -> list[int]:
        """Ids of all nodes whose name matches exactly, in creation order."""
        return [n.id for n in self.nodes if n.name == name]

    def find_prefix(self, prefix: str) -> list[int]:
        return [n.id for n in self.nodes if n.name is not None and n.name.startswith(prefix)]


SOURCES = SOURCE_OPS
