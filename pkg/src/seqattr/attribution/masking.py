"""Feature masking.

Every attribution and faithfulness component removes features through this
one function so "feature absent" means the same thing everywhere: a masked
code slot becomes the pad code (which embeds to the zero vector) and a masked
lab is overwritten with the policy's fill value.  Visit count and time gaps
are structural and never masked.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..data.records import CODE, LAB, PAD_CODE, FeaturePosition, PatientRecord


@dataclass(frozen=True)
class MaskPolicy:
    lab_fill: float = 0.0  # labs are generated on a standardized scale

    def code_fill(self) -> int:
        return PAD_CODE


def _as_position(p) -> FeaturePosition:
    if isinstance(p, FeaturePosition):
        return p
    v, kind, idx = p
    return FeaturePosition(int(v), str(kind), int(idx))


def mask(record: PatientRecord, positions, policy: MaskPolicy = MaskPolicy()) -> PatientRecord:
    """Return a copy of the record with the given feature positions removed."""
    out = record.copy()
    seen = []
    for raw in positions:
        p = _as_position(raw)
        if not 0 <= p.visit < out.n_visits:
            raise ValueError(f"visit {p.visit} out of range for {record.record_id}")
        if p.kind == CODE:
            if not 0 <= p.index < len(out.visits[p.visit]):
                raise ValueError(
                    f"code slot {p.index} out of range in visit {p.visit} of {record.record_id}"
                )
            out.visits[p.visit][p.index] = policy.code_fill()
        elif p.kind == LAB:
            if not 0 <= p.index < out.n_labs:
                raise ValueError(
                    f"lab {p.index} out of range in visit {p.visit} of {record.record_id}"
                )
            out.labs[p.visit][p.index] = policy.lab_fill
        else:
            raise ValueError(f"unknown position kind {p.kind!r}")
        seen.append(p.as_list())
    out.meta = dict(out.meta)
    out.meta["masked_positions"] = out.meta.get("masked_positions", []) + seen
    return out


def full_mask(record: PatientRecord, policy: MaskPolicy = MaskPolicy()) -> PatientRecord:
    """The all-features-removed reference record."""
    return mask(record, record.feature_positions(), policy)
