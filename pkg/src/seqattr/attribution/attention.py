"""Attention-relevance attribution.

Relevance rollout: per layer, average over heads of the positive part of
(gradient * attention), then accumulate R <- R + A_bar @ R from an identity
start.  Visit relevance is the column mean of R; within a visit it is split
across feature positions in proportion to |grad * input| of their leaves.
Costs exactly one traced forward and one backward, which is the method's
entire point.
"""

from __future__ import annotations

import re
from collections import defaultdict

import numpy as np

from ..autodiff import backward
from ..errors import MethodNotApplicableError
from ..models.nets import ATTN_PREFIX
from .base import AttributionMap, Attributor
from .gradient import _target_scalar

_ATTN_RE = re.compile(r"attn:l(\d+):h(\d+)$")


class CheferAttributor(Attributor):
    name = "chefer"

    def explain(self, model, record, target_class=None) -> AttributionMap:
        if model.config.arch == "stage-recurrent":
            raise MethodNotApplicableError(
                "attention relevance needs attention layers; "
                f"arch {model.config.arch!r} has none"
            )
        trace = model.trace(record)
        target = trace.pred_class if target_class is None else int(target_class)
        tape = trace.tape
        attn_ids = tape.find_prefix(ATTN_PREFIX)
        if not attn_ids:
            raise MethodNotApplicableError("no attention maps recorded in the trace")
        out = _target_scalar(trace, target)
        leaf_ids = [l.node_id for l in trace.leaves]
        grads = backward(tape, out, wrt=leaf_ids + attn_ids)

        by_layer = defaultdict(list)
        for nid in attn_ids:
            m = _ATTN_RE.search(tape.nodes[nid].name)
            by_layer[int(m.group(1))].append(nid)
        n_visits = record.n_visits
        relevance = np.eye(n_visits)
        for layer in sorted(by_layer):
            acc = np.zeros((n_visits, n_visits))
            for nid in by_layer[layer]:
                cam = np.maximum(grads[nid] * tape.nodes[nid].value, 0.0)[0]
                acc += cam
            a_bar = acc / len(by_layer[layer])
            relevance = relevance + a_bar @ relevance
        visit_scores = relevance.mean(axis=0)

        # distribute each visit's relevance over its features
        leaf_w = np.array(
            [float(np.abs(grads[l.node_id] * l.value).sum()) for l in trace.leaves]
        )
        scores = np.zeros(len(trace.leaves))
        by_visit = defaultdict(list)
        for k, leaf in enumerate(trace.leaves):
            by_visit[leaf.position.visit].append(k)
        for v, ks in by_visit.items():
            w = leaf_w[ks]
            total = w.sum()
            share = w / total if total > 0 else np.full(len(ks), 1.0 / len(ks))
            for j, k in enumerate(ks):
                scores[k] = visit_scores[v] * share[j]
        return AttributionMap(
            record_id=record.record_id,
            method=self.name,
            target_class=target,
            positions=[l.position for l in trace.leaves],
            scores=scores,
            meta={"n_attention_layers": len(by_layer)},
        )
