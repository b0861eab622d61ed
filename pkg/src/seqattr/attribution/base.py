"""Attribution interfaces.

An attributor explains one (model, record) pair at a time and returns an
AttributionMap: one score per feature position, aligned with the record's
feature grid.  Higher score = more responsible for the target class.  The
target class defaults to the model's prediction on the unmasked record.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ..data.records import FeaturePosition, PatientRecord


@dataclass
class AttributionMap:
    record_id: str
    method: str
    target_class: int
    positions: list  # list[FeaturePosition]
    scores: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.shape != (len(self.positions),):
            raise ValueError(
                f"{self.method}: {len(self.positions)} positions but scores shape {self.scores.shape}"
            )

    def ranked_indices(self) -> np.ndarray:
        """Grid indices sorted by descending score; ties break by position order."""
        order = np.lexsort((np.arange(len(self.scores)), -self.scores))
        return order

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "method": self.method,
            "target_class": int(self.target_class),
            "positions": [p.as_list() for p in self.positions],
            "scores": [float(s) for s in self.scores],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttributionMap":
        return cls(
            record_id=d["record_id"],
            method=d["method"],
            target_class=int(d["target_class"]),
            positions=[FeaturePosition(v, k, i) for v, k, i in d["positions"]],
            scores=np.asarray(d["scores"], dtype=np.float64),
            meta=dict(d.get("meta", {})),
        )


def record_rng(base_seed: int, record_id: str) -> np.random.Generator:
    """Deterministic per-record generator, independent of evaluation order."""
    return np.random.default_rng(
        np.random.SeedSequence([int(base_seed), zlib.crc32(record_id.encode("utf-8"))])
    )


class Attributor(BaseEstimator):
    """Base class; subclasses set `name` and implement explain()."""

    name: str = "?"

    def explain(
        self, model, record: PatientRecord, target_class: int | None = None
    ) -> AttributionMap:
        raise NotImplementedError

    @staticmethod
    def _predicted_class(model, record) -> int:
        return int(np.argmax(model.predict_proba_record(record)))
