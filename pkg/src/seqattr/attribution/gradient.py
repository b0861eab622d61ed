"""Gradient-based attribution.

All four methods score against the target-class logit (probabilities would
couple scores to the other classes through the softmax).  Scores live on the
feature grid: a position's score sums grad * input over the dimensions of
its leaf (embedding vector for code slots, raw scalar for labs).
"""

from __future__ import annotations

import numpy as np

from ..autodiff import BackwardPolicy, backward, bump_forward, record_reference_pass
from .base import AttributionMap, Attributor


def _target_scalar(trace, target: int) -> int:
    tape = trace.tape
    picked = tape.slice(trace.logits_id, axis=1, start=target, stop=target + 1)
    return tape.sum(picked)


def _leaf_grads(trace, target: int, policy=None, out=None) -> dict:
    if out is None:
        out = _target_scalar(trace, target)
    wrt = [l.node_id for l in trace.leaves]
    return backward(trace.tape, out, policy, wrt=wrt)


def _dot_scores(trace, grads, against="value") -> np.ndarray:
    scores = np.empty(len(trace.leaves))
    for k, leaf in enumerate(trace.leaves):
        ref = leaf.value if against == "value" else leaf.value - leaf.baseline
        scores[k] = float(np.sum(grads[leaf.node_id] * ref))
    return scores


class GradientXInputAttributor(Attributor):
    name = "gradient-x-input"

    def explain(self, model, record, target_class=None) -> AttributionMap:
        trace = model.trace(record)
        target = trace.pred_class if target_class is None else int(target_class)
        grads = _leaf_grads(trace, target)
        return AttributionMap(
            record_id=record.record_id,
            method=self.name,
            target_class=target,
            positions=[l.position for l in trace.leaves],
            scores=_dot_scores(trace, grads),
            meta={"target_logit": float(trace.logits[target])},
        )


class IntegratedGradientsAttributor(Attributor):
    """Path integral from the fully-masked reference, midpoint Riemann sum.

    Each of the n_steps interpolation points is evaluated and differentiated
    separately (the method's cost is its pass count by construction); the
    graph is recorded once per record and replayed per point.
    """

    name = "integrated-gradients"

    def __init__(self, n_steps: int = 50):
        self.n_steps = n_steps

    def explain(self, model, record, target_class=None) -> AttributionMap:
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        base_trace = model.trace(record)
        target = base_trace.pred_class if target_class is None else int(target_class)
        leaves = base_trace.leaves
        tape = base_trace.tape
        out = _target_scalar(base_trace, target)
        wrt = [l.node_id for l in leaves]
        x = [np.array(l.value) for l in leaves]
        ref = [l.baseline for l in leaves]
        diff = [x[k] - ref[k] for k in range(len(leaves))]
        f_x = float(base_trace.logits[target])
        grad_sum = [np.zeros_like(v) for v in x]
        # All interpolation points per leaf up front (row i = step i), so each
        # step's override is a row view instead of a fresh allocation.
        alphas = np.array([(step + 0.5) / self.n_steps for step in range(self.n_steps)])
        interp = [
            ref[k] + alphas.reshape((-1,) + (1,) * ref[k].ndim) * diff[k]
            for k in range(len(leaves))
        ]
        for step in range(self.n_steps):
            tape.replay({wrt[k]: interp[k][step] for k in range(len(leaves))})
            bump_forward()
            grads = backward(tape, out, wrt=wrt)
            for k, leaf in enumerate(leaves):
                grad_sum[k] += grads[leaf.node_id]
        scores = np.array(
            [float(np.sum(grad_sum[k] / self.n_steps * (x[k] - ref[k]))) for k in range(len(leaves))]
        )
        tape.replay({leaves[k].node_id: ref[k] for k in range(len(leaves))})
        bump_forward()
        f_ref = float(tape.value(base_trace.logits_id)[0, target])
        residual = abs(scores.sum() - (f_x - f_ref))
        return AttributionMap(
            record_id=record.record_id,
            method=self.name,
            target_class=target,
            positions=[l.position for l in leaves],
            scores=scores,
            meta={
                "n_steps": int(self.n_steps),
                "completeness_residual": residual,
                "delta": f_x - f_ref,
            },
        )


class DeepLiftAttributor(Attributor):
    """Difference-from-reference multipliers; satisfies summation-to-delta."""

    name = "deeplift"

    def explain(self, model, record, target_class=None) -> AttributionMap:
        trace = model.trace(record)
        target = trace.pred_class if target_class is None else int(target_class)
        # the scalar head extends the tape, so build it before replaying refs
        out = _target_scalar(trace, target)
        refs = record_reference_pass(
            trace.tape, {l.node_id: l.baseline for l in trace.leaves}
        )
        policy = BackwardPolicy(mode="deeplift-rescale", references=refs)
        grads = _leaf_grads(trace, target, policy, out=out)
        scores = _dot_scores(trace, grads, against="delta")
        f_x = float(trace.logits[target])
        f_ref = float(refs[trace.logits_id][0, target])
        return AttributionMap(
            record_id=record.record_id,
            method=self.name,
            target_class=target,
            positions=[l.position for l in trace.leaves],
            scores=scores,
            meta={
                "delta": f_x - f_ref,
                "summation_gap": abs(float(scores.sum()) - (f_x - f_ref)),
            },
        )


class GimAttributor(Attributor):
    """Gradient x input with smoothed softmax, frozen-statistics layer norm,
    and optional gate rerouting in the backward pass."""

    name = "gim"

    def __init__(self, temperature: float = 2.0, gate_flags: tuple = ()):
        self.temperature = temperature
        self.gate_flags = gate_flags

    def explain(self, model, record, target_class=None) -> AttributionMap:
        trace = model.trace(record)
        target = trace.pred_class if target_class is None else int(target_class)
        policy = BackwardPolicy(
            mode="gim",
            temperature=float(self.temperature),
            gate_flags=frozenset(self.gate_flags),
        )
        grads = _leaf_grads(trace, target, policy)
        return AttributionMap(
            record_id=record.record_id,
            method=self.name,
            target_class=target,
            positions=[l.position for l in trace.leaves],
            scores=_dot_scores(trace, grads),
            meta={
                "temperature": float(self.temperature),
                "gate_flags": sorted(self.gate_flags),
            },
        )
