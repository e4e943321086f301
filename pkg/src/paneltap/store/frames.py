"""Segment file format: length-prefixed AES-256-GCM frames.

Layout (see docs/segment_format.md):

    file   := magic frames*
    magic  := "PTSG" version(1 byte, currently 0x01)
    frame  := length(u32 BE, over nonce+ciphertext) nonce(12) ciphertext

Each frame is one encrypted JSON record. Readers skip nothing and verify
every tag, so a torn tail (partial final frame) is detected and ignored.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from ..errors import StorageError
from ..keys import generate_key_file, load_key  # noqa: F401  (re-exported)

MAGIC = b"PTSG\x01"
_LEN = struct.Struct(">I")
NONCE_SIZE = 12


def encrypt_frame(key: bytes, plaintext: bytes) -> bytes:
    nonce = os.urandom(NONCE_SIZE)
    ciphertext = AESGCM(key).encrypt(nonce, plaintext, None)
    body = nonce + ciphertext
    return _LEN.pack(len(body)) + body


def decrypt_frame(key: bytes, body: bytes) -> bytes:
    nonce, ciphertext = body[:NONCE_SIZE], body[NONCE_SIZE:]
    try:
        return AESGCM(key).decrypt(nonce, ciphertext, None)
    except InvalidTag:
        raise StorageError("frame failed authentication (wrong key or corrupt segment)") from None


def iter_frames(path: Path, key: bytes):
    """Yield (offset, plaintext) for every complete frame; tolerates a torn tail."""
    data = path.read_bytes()
    if not data.startswith(MAGIC):
        raise StorageError(f"{path}: bad segment magic")
    offset = len(MAGIC)
    while offset + _LEN.size <= len(data):
        (length,) = _LEN.unpack_from(data, offset)
        start = offset + _LEN.size
        if start + length > len(data):
            break  # torn tail from an interrupted append
        yield offset, decrypt_frame(key, data[start : start + length])
        offset = start + length


def new_segment(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "xb") as handle:
        handle.write(MAGIC)
        handle.flush()
        os.fsync(handle.fileno())


def append_frame(path: Path, key: bytes, plaintext: bytes) -> int:
    """Append one frame, durable before return; returns its offset."""
    frame = encrypt_frame(key, plaintext)
    with open(path, "ab") as handle:
        offset = handle.tell()
        handle.write(frame)
        handle.flush()
        os.fsync(handle.fileno())
    return offset
