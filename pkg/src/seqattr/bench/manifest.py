"""Run manifest: checksums of every artifact, enabling provenance and resume.

All writes go through a single manifest per output directory; a stage skips
work whose output is recorded, present, and checksum-stable under the same
config hash.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    FILENAME = "manifest.json"

    def __init__(self, root, config_hash: str):
        self.root = Path(root)
        self.config_hash = config_hash
        self.entries: dict = {}

    @classmethod
    def load(cls, root, config_hash: str) -> "Manifest":
        """Load the manifest for ``root``; a config-hash mismatch starts a
        fresh manifest (old entries must not authorize skips)."""
        m = cls(root, config_hash)
        path = m.root / cls.FILENAME
        if path.exists():
            data = json.loads(path.read_text(encoding="utf-8"))
            if data.get("config_hash") == config_hash:
                m.entries = data.get("entries", {})
        return m

    def save(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / self.FILENAME
        tmp = path.with_suffix(".json.tmp")
        payload = {"config_hash": self.config_hash, "entries": self.entries}
        tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, path)

    def mark_file(self, relpath: str, stage: str, extra: dict | None = None) -> None:
        """Record a written artifact with its checksum."""
        entry = {
            "stage": stage,
            "status": "done",
            "sha256": file_sha256(self.root / relpath),
        }
        if extra:
            entry["extra"] = extra
        self.entries[relpath] = entry
        self.save()

    def mark_status(self, key: str, stage: str, status: str, extra: dict | None = None) -> None:
        """Record a non-file outcome (not-applicable, diverged)."""
        entry = {"stage": stage, "status": status}
        if extra:
            entry["extra"] = extra
        self.entries[key] = entry
        self.save()

    def status(self, key: str):
        entry = self.entries.get(key)
        return entry["status"] if entry else None

    def extra(self, key: str) -> dict:
        entry = self.entries.get(key, {})
        return entry.get("extra", {})

    def is_current(self, relpath: str) -> bool:
        """True when the artifact exists and matches its recorded checksum."""
        entry = self.entries.get(relpath)
        if not entry or entry.get("status") != "done" or "sha256" not in entry:
            return False
        path = self.root / relpath
        return path.exists() and file_sha256(path) == entry["sha256"]
