"""Binary checkpoint container.

Layout: magic "SPKLCKPT1\\n", 4-byte little-endian metadata length, a JSON
metadata block describing the architecture and listing each array's name
and shape in declaration order, the arrays as little-endian float32, and a
closing SHA-256 over everything above.
"""

import hashlib
import json
import struct

import numpy as np

__all__ = [
    "CheckpointError",
    "CheckpointVersionError",
    "CheckpointTruncatedError",
    "CheckpointChecksumError",
    "write_checkpoint",
    "read_checkpoint",
    "CKPT_MAGIC",
]

CKPT_MAGIC = b"SPKLCKPT1\n"


class CheckpointError(Exception):
    """Base class for checkpoint-file failures."""


class CheckpointVersionError(CheckpointError):
    """Magic not recognized."""


class CheckpointTruncatedError(CheckpointError):
    """File shorter than the declared contents."""


class CheckpointChecksumError(CheckpointError):
    """Stored SHA-256 does not match."""


def write_checkpoint(path, meta: dict, arrays: "list[tuple[str, np.ndarray]]") -> str:
    """Write named arrays with metadata; returns the SHA-256 hex digest."""
    meta = dict(meta)
    meta["arrays"] = [{"name": n, "shape": list(a.shape)} for n, a in arrays]
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    hasher = hashlib.sha256()
    with open(path, "wb") as fh:
        for chunk in (CKPT_MAGIC, struct.pack("<I", len(meta_bytes)), meta_bytes):
            fh.write(chunk)
            hasher.update(chunk)
        for _, arr in arrays:
            buf = np.ascontiguousarray(arr, dtype="<f4").tobytes()
            fh.write(buf)
            hasher.update(buf)
        digest = hasher.digest()
        fh.write(digest)
    return digest.hex()


def read_checkpoint(path) -> "tuple[dict, list[np.ndarray]]":
    """Read (metadata, arrays); arrays come back float32 in stored order."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(CKPT_MAGIC) + 4:
        raise CheckpointTruncatedError(f"{path}: file shorter than header")
    if blob[: len(CKPT_MAGIC)] != CKPT_MAGIC:
        raise CheckpointVersionError(f"{path}: not a SPKLCKPT1 checkpoint")
    (mlen,) = struct.unpack_from("<I", blob, len(CKPT_MAGIC))
    header_end = len(CKPT_MAGIC) + 4 + mlen
    if len(blob) < header_end:
        raise CheckpointTruncatedError(f"{path}: metadata truncated")
    meta = json.loads(blob[len(CKPT_MAGIC) + 4: header_end].decode("utf-8"))

    sizes = [int(np.prod(d["shape"])) if d["shape"] else 1 for d in meta["arrays"]]
    payload_len = 4 * sum(sizes)
    expected = header_end + payload_len + 32
    if len(blob) < expected:
        raise CheckpointTruncatedError(f"{path}: expected {expected} bytes, found {len(blob)}")
    digest = hashlib.sha256(blob[: header_end + payload_len]).digest()
    if digest != blob[header_end + payload_len: expected]:
        raise CheckpointChecksumError(f"{path}: SHA-256 mismatch; file corrupted")

    arrays = []
    offset = header_end
    for desc, size in zip(meta["arrays"], sizes):
        arr = np.frombuffer(blob, dtype="<f4", count=size, offset=offset)
        arrays.append(arr.reshape(desc["shape"]).copy())
        offset += 4 * size
    return meta, arrays
