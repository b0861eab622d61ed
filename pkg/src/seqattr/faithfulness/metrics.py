"""Faithfulness metrics for feature attributions on sequence records.

Both metrics perturb the record according to the attribution ranking and
watch the model's probability for the originally predicted class:

* comprehensiveness — drop the top-ranked fraction k of features and average
  the probability fall over the fraction grid (higher = the ranking found
  features the model relied on);
* sufficiency — keep only the top-ranked fraction and average the probability
  fall (lower = the kept features alone preserve the prediction).

The composite score `comprehensiveness * (1 - sufficiency)` rewards rankings
that are strong on both axes at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np

from ..attribution.base import AttributionMap
from ..attribution.masking import MaskPolicy, mask

K_GRID = (0.01, 0.05, 0.10, 0.20, 0.50)


@dataclass
class FaithfulnessResult:
    record_id: str
    method: str
    target_class: int
    comprehensiveness: float
    sufficiency: float
    composite: float
    p_full: float
    per_k: dict = field(default_factory=dict)  # k -> {"n", "comp", "suff"}

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "method": self.method,
            "target_class": self.target_class,
            "comprehensiveness": self.comprehensiveness,
            "sufficiency": self.sufficiency,
            "composite": self.composite,
            "p_full": self.p_full,
            "per_k": {str(k): dict(v) for k, v in self.per_k.items()},
        }


def top_fraction_count(d: int, k: float) -> int:
    """Number of features in the top fraction k of a d-feature record."""
    if d < 1:
        raise ValueError("record has no features")
    if not 0.0 < k <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {k}")
    return max(1, ceil(k * d))


def faithfulness_scores(
    model,
    record,
    amap: AttributionMap,
    k_grid=K_GRID,
    policy: MaskPolicy | None = None,
) -> FaithfulnessResult:
    """Score one attribution map against the model that produced it.

    The evaluated class is the map's target class (the benchmark always sets
    it to the model's predicted class on the unperturbed record).  Ties in
    the ranking break by feature-grid order, so results are deterministic.
    """
    positions = record.feature_positions()
    if amap.positions != positions:
        raise ValueError("attribution map does not align with the record's feature grid")
    policy = policy or MaskPolicy()
    d = len(positions)
    target = amap.target_class
    p_full = float(model.predict_proba_record(record)[target])
    ranked = amap.ranked_indices()

    # Distinct fractions can collapse onto the same feature count on short
    # records; evaluate each count once and reuse it across the grid.
    cache: dict[int, tuple[float, float]] = {}
    per_k: dict[float, dict] = {}
    comp_terms, suff_terms = [], []
    for k in k_grid:
        n_k = top_fraction_count(d, k)
        if n_k not in cache:
            top = [positions[i] for i in ranked[:n_k]]
            rest = [positions[i] for i in ranked[n_k:]]
            p_drop = float(model.predict_proba_record(mask(record, top, policy))[target])
            p_keep = float(model.predict_proba_record(mask(record, rest, policy))[target])
            cache[n_k] = (p_full - p_drop, p_full - p_keep)
        comp_k, suff_k = cache[n_k]
        per_k[k] = {"n": n_k, "comp": comp_k, "suff": suff_k}
        comp_terms.append(comp_k)
        suff_terms.append(suff_k)

    comp = float(np.mean(comp_terms))
    suff = float(np.mean(suff_terms))
    return FaithfulnessResult(
        record_id=record.record_id,
        method=amap.method,
        target_class=target,
        comprehensiveness=comp,
        sufficiency=suff,
        composite=comp * (1.0 - suff),
        p_full=p_full,
        per_k=per_k,
    )
