"""Patient record container and the feature-position grid.

A record is a variable-length visit sequence.  Every visit carries a set of
discrete event codes (code id 0 is reserved for padding), a fixed-length lab
panel, and the time gap in days since the previous visit.

Attribution and masking address individual features through a flat position
grid: for each visit, its code slots in order, then its lab slots.  Only real
content positions appear in the grid, never padding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

PAD_CODE = 0

# position kinds
CODE = "code"
LAB = "lab"


@dataclass(frozen=True)
class FeaturePosition:
    visit: int
    kind: str  # CODE or LAB
    index: int  # code slot within the visit, or lab panel index

    def as_list(self) -> list:
        return [self.visit, self.kind, self.index]


@dataclass
class PatientRecord:
    record_id: str
    visits: list  # list[list[int]] event codes per visit, no padding
    labs: list  # list[list[float]] lab panel per visit
    deltas: list  # list[float] days since previous visit, deltas[0] == 0
    label: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.visits)
        if not (len(self.labs) == len(self.deltas) == n):
            raise ValueError(
                f"{self.record_id}: visits/labs/deltas lengths differ "
                f"({n}/{len(self.labs)}/{len(self.deltas)})"
            )
        if n == 0:
            raise ValueError(f"{self.record_id}: record has no visits")
        # Masked records legitimately hold the pad code in a slot, so slot
        # contents are not validated here; only structure is.
        for v, codes in enumerate(self.visits):
            if len(codes) == 0:
                raise ValueError(f"{self.record_id}: visit {v} has no codes")

    @property
    def n_visits(self) -> int:
        return len(self.visits)

    @property
    def n_labs(self) -> int:
        return len(self.labs[0])

    def feature_positions(self) -> list[FeaturePosition]:
        """Flat maskable grid: per visit, code slots then labs."""
        out = []
        for v, codes in enumerate(self.visits):
            for j in range(len(codes)):
                out.append(FeaturePosition(v, CODE, j))
            for l in range(len(self.labs[v])):
                out.append(FeaturePosition(v, LAB, l))
        return out

    @property
    def n_features(self) -> int:
        return sum(len(c) for c in self.visits) + self.n_visits * self.n_labs

    def ground_truth_positions(self) -> list[FeaturePosition]:
        return [FeaturePosition(v, k, i) for v, k, i in self.meta.get("ground_truth", [])]

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "visits": [list(map(int, v)) for v in self.visits],
            "labs": [[float(x) for x in row] for row in self.labs],
            "deltas": [float(d) for d in self.deltas],
            "label": int(self.label),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PatientRecord":
        return cls(
            record_id=str(d["record_id"]),
            visits=[list(map(int, v)) for v in d["visits"]],
            labs=[[float(x) for x in row] for row in d["labs"]],
            deltas=[float(x) for x in d["deltas"]],
            label=int(d["label"]),
            meta=dict(d.get("meta", {})),
        )

    def copy(self) -> "PatientRecord":
        return PatientRecord.from_dict(self.to_dict())


def encode_batch(
    records,
    max_visits: int,
    max_codes: int,
    n_labs: Optional[int] = None,
) -> dict:
    """Pad a batch of records into dense arrays for model consumption.

    Records longer than max_visits keep their most recent visits.  Returns
    codes [B,V,C] int64 (0 = pad), labs [B,V,L], deltas [B,V] (log1p-scaled),
    visit_mask [B,V] and code_mask [B,V,C] floats.
    """
    b = len(records)
    n_labs = n_labs if n_labs is not None else records[0].n_labs
    codes = np.zeros((b, max_visits, max_codes), dtype=np.int64)
    labs = np.zeros((b, max_visits, n_labs), dtype=np.float64)
    deltas = np.zeros((b, max_visits), dtype=np.float64)
    visit_mask = np.zeros((b, max_visits), dtype=np.float64)
    for i, r in enumerate(records):
        vis, lab, dts = r.visits, r.labs, r.deltas
        if len(vis) > max_visits:
            vis = vis[-max_visits:]
            lab = lab[-max_visits:]
            dts = dts[-max_visits:]
        for v, vcodes in enumerate(vis):
            kept = vcodes[:max_codes]
            codes[i, v, : len(kept)] = kept
            labs[i, v, :] = lab[v][:n_labs]
            deltas[i, v] = np.log1p(max(dts[v], 0.0))
            visit_mask[i, v] = 1.0
    code_mask = (codes != PAD_CODE).astype(np.float64)
    return {
        "codes": codes,
        "labs": labs,
        "deltas": deltas,
        "visit_mask": visit_mask,
        "code_mask": code_mask,
    }
