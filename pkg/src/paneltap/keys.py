"""Key file handling. Keys are 32 bytes, stored hex-encoded (or raw), and are
referenced by path only - the config file never embeds key material."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

from .errors import StorageError

KEY_SIZE = 32


def load_key(path: str | Path, what: str = "key") -> bytes:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise StorageError(f"{what} file missing: {path}") from None
    stripped = raw.strip()
    if len(stripped) == KEY_SIZE * 2:
        try:
            return bytes.fromhex(stripped.decode())
        except (UnicodeDecodeError, ValueError):
            raise StorageError(f"{what} file {path} is neither raw nor hex") from None
    if len(raw) == KEY_SIZE:
        return raw
    raise StorageError(f"{what} must be {KEY_SIZE} bytes raw or hex, got {len(raw)} bytes")


def generate_key_file(path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(os.urandom(KEY_SIZE).hex().encode() + b"\n")
    path.chmod(0o600)


def key_id(key: bytes) -> str:
    return hashlib.sha256(key).hexdigest()[:12]
