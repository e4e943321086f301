"""Keyed pseudonymization with a separated mapping store.

A pseudonym is HMAC-SHA256(key, participant_id) - deterministic per key,
collision-free in practice, and uninvertible without the key. Plain hashing
or renumbering would not do: anyone with the panel roster could replay it.
The participant->pseudonym mapping is recorded only in the mapping store,
which must live outside the capture store's directory tree.
"""

from __future__ import annotations

import hmac
import hashlib
import json
import os
import threading
from pathlib import Path

from ..errors import ConfigurationError, StorageError
from ..keys import key_id, load_key


class PseudonymVault:
    def __init__(self, key_file: str | Path | None, mapping_dir: str | Path):
        if key_file is None:
            raise ConfigurationError("pseudonymization key file not configured")
        try:
            self.key = load_key(key_file, what="pseudonym key")
        except StorageError as exc:
            # Never fall back to identity or an unkeyed hash.
            raise ConfigurationError(str(exc)) from None
        self.key_id = key_id(self.key)
        self.mapping_dir = Path(mapping_dir)
        self.mapping_dir.mkdir(parents=True, exist_ok=True)
        self.mapping_file = self.mapping_dir / "pseudonyms.jsonl"
        self._lock = threading.Lock()
        self._known: dict[str, str] = {}
        if self.mapping_file.exists():
            for line in self.mapping_file.read_text().splitlines():
                if line.strip():
                    doc = json.loads(line)
                    if doc.get("key_id") == self.key_id:
                        self._known[doc["participant_id"]] = doc["pseudonym"]

    def pseudonymize(self, participant_id: str) -> str:
        digest = hmac.new(self.key, participant_id.encode("utf-8"), hashlib.sha256)
        pseudonym = "ps-" + digest.hexdigest()[:40]
        with self._lock:
            if participant_id not in self._known:
                self._known[participant_id] = pseudonym
                line = json.dumps(
                    {
                        "participant_id": participant_id,
                        "pseudonym": pseudonym,
                        "key_id": self.key_id,
                    },
                    sort_keys=True,
                )
                with open(self.mapping_file, "a") as handle:
                    handle.write(line + "\n")
                    handle.flush()
                    os.fsync(handle.fileno())
        return pseudonym

    def reverse_mapping(self) -> dict[str, str]:
        """pseudonym -> participant_id, for authorized audit flows only."""
        with self._lock:
            return {pseudonym: pid for pid, pseudonym in self._known.items()}
