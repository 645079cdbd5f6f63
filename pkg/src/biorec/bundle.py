"""Checksummed container underneath saved model bundles.

A container is a small header (magic, format version, payload length,
SHA-256 digest) followed by an uncompressed npz payload. Loading verifies
all four before deserializing; pickled objects are refused in both
directions. The pipeline module maps model bundles to and from the flat
array dict stored here.
"""

from __future__ import annotations

import hashlib
import io
import struct
from pathlib import Path

import numpy as np

from .errors import BundleError

MAGIC = b"BIORECB\x01"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIQ32s")


def write_container(path, arrays: dict[str, np.ndarray]) -> None:
    """Write named arrays to `path` with an integrity header."""
    if not arrays:
        raise BundleError("refusing to write an empty bundle")
    buf = io.BytesIO()
    np.savez(buf, **{k: np.asarray(v) for k, v in arrays.items()})
    payload = buf.getvalue()
    digest = hashlib.sha256(payload).digest()
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, len(payload), digest)
    Path(path).write_bytes(header + payload)


def read_container(path) -> dict[str, np.ndarray]:
    """Read a container back into a name -> array dict, verifying integrity."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise BundleError(f"cannot read bundle: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise BundleError("bundle truncated (no header)")
    magic, version, length, digest = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BundleError("not a model bundle (bad magic)")
    if version != FORMAT_VERSION:
        raise BundleError(f"unsupported bundle format version {version}")
    payload = raw[_HEADER.size:]
    if len(payload) != length:
        raise BundleError("bundle truncated (payload length mismatch)")
    if hashlib.sha256(payload).digest() != digest:
        raise BundleError("bundle checksum mismatch")
    try:
        with np.load(io.BytesIO(payload), allow_pickle=False) as npz:
            return {name: npz[name] for name in npz.files}
    except (ValueError, OSError, KeyError) as exc:
        raise BundleError(f"bundle payload is not valid: {exc}") from exc
