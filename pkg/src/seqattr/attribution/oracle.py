"""Ground-truth oracle: scores 1 exactly at the generator's planted
decision-relevant positions.  The upper reference line for faithfulness."""

from __future__ import annotations

import numpy as np

from .base import AttributionMap, Attributor


class OracleAttributor(Attributor):
    name = "oracle"

    def explain(self, model, record, target_class=None) -> AttributionMap:
        gt = record.ground_truth_positions()
        if not gt:
            raise ValueError(f"{record.record_id} carries no ground-truth positions")
        positions = record.feature_positions()
        index = {p: k for k, p in enumerate(positions)}
        scores = np.zeros(len(positions))
        for p in gt:
            if p not in index:
                raise ValueError(f"{record.record_id}: ground-truth position {p} not on the grid")
            scores[index[p]] = 1.0
        target = self._predicted_class(model, record) if target_class is None else int(target_class)
        return AttributionMap(
            record_id=record.record_id,
            method=self.name,
            target_class=target,
            positions=positions,
            scores=scores,
            meta={"n_marked": int(scores.sum())},
        )
