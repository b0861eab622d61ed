"""JSONL import/export for patient records.

One JSON object per line; floats serialize via repr so a round trip is exact
at the bit level.
"""

from __future__ import annotations

import json
from pathlib import Path

from .records import PatientRecord


def export_jsonl(records, path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), separators=(",", ":"), sort_keys=True))
            fh.write("\n")
    return len(records)


def import_jsonl(path) -> list:
    path = Path(path)
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {e}") from None
            try:
                records.append(PatientRecord.from_dict(d))
            except (KeyError, TypeError, ValueError) as e:
                raise ValueError(f"{path}:{lineno}: bad record: {e}") from None
    if not records:
        raise ValueError(f"{path}: no records found")
    return records
