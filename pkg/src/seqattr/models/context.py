"""Execution contexts for model trunks.

A trunk is written once against this op surface and runs in two modes:
TapeCtx records every op onto a tape (training, gradient attribution) while
ArrayCtx evaluates the same ops directly on ndarrays (fast prediction).  Both
dispatch through the shared op implementations, so a traced forward and an
untraced forward of the same input produce identical logits.
"""

from __future__ import annotations

import numpy as np

from ..autodiff.ops import run_forward
from ..autodiff.tape import Tape


class _OpSurface:
    def matmul(self, a, b, transpose_b: bool = False, name=None):
        return self.apply("matmul", (a, b), name=name, transpose_b=transpose_b)

    def add(self, a, b, name=None):
        return self.apply("add", (a, b), name=name)

    def mul(self, a, b, gate=None, gate_name=None, name=None):
        params = {}
        if gate is not None:
            params = {"gate": gate, "gate_name": gate_name}
        return self.apply("mul", (a, b), name=name, **params)

    def relu(self, a, name=None):
        return self.apply("relu", (a,), name=name)

    def sigmoid(self, a, name=None):
        return self.apply("sigmoid", (a,), name=name)

    def tanh(self, a, name=None):
        return self.apply("tanh", (a,), name=name)

    def exp(self, a, name=None):
        return self.apply("exp", (a,), name=name)

    def softmax(self, a, name=None):
        return self.apply("softmax", (a,), name=name)

    def layer_norm(self, x, gamma, beta, name=None):
        return self.apply("layer_norm", (x, gamma, beta), name=name)

    def embedding_lookup(self, table, indices, name=None):
        return self.apply(
            "embedding_lookup", (table,), name=name, indices=np.asarray(indices, dtype=np.int64)
        )

    def concat(self, handles, axis: int, name=None):
        return self.apply("concat", tuple(handles), name=name, axis=axis)

    def slice(self, a, axis: int, start: int, stop: int, name=None):
        return self.apply("slice", (a,), name=name, axis=axis, start=start, stop=stop)

    def sum(self, a, axis=None, keepdims=False, name=None):
        return self.apply("sum", (a,), name=name, axis=axis, keepdims=keepdims)

    def mean(self, a, axis=None, keepdims=False, name=None):
        return self.apply("mean", (a,), name=name, axis=axis, keepdims=keepdims)


class ArrayCtx(_OpSurface):
    """Plain-ndarray execution; handles are the arrays themselves."""

    traced = False

    def __init__(self, params: dict):
        self._params = params

    def apply(self, op, handles, name=None, **params):
        value, _ = run_forward(op, handles, params)
        return value

    def const(self, value):
        return np.asarray(value, dtype=np.float64)

    def param(self, key: str):
        return self._params[key]

    def shape(self, handle) -> tuple:
        return handle.shape

    def value(self, handle) -> np.ndarray:
        return handle


class TapeCtx(_OpSurface):
    """Tape-recording execution; handles are node ids."""

    traced = True

    def __init__(self, params: dict, tape: Tape | None = None):
        self._params = params
        self.tape = tape if tape is not None else Tape()
        self._param_nodes: dict[str, int] = {}

    def apply(self, op, handles, name=None, **params):
        return self.tape.apply(op, handles, name=name, **params)

    def const(self, value):
        return self.tape.const(value)

    def param(self, key: str):
        if key not in self._param_nodes:
            self._param_nodes[key] = self.tape.param(self._params[key], name=key)
        return self._param_nodes[key]

    def shape(self, handle) -> tuple:
        return self.tape.nodes[handle].value.shape

    def value(self, handle) -> np.ndarray:
        return self.tape.nodes[handle].value
