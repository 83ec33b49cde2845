"""CEB1 wire format: the interface to the embedding-consumer pipeline.

Layout (little-endian): magic b"CEB1", u16 version 1, u32 dim, then
records of u32 doc_id, u32 token_index, u16 token byte length, UTF-8
token bytes, dim x float32.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CEB1"
VERSION = 1
_HEADER = struct.Struct("<4sHI")
_REC_FIXED = struct.Struct("<IIH")


class CebWriter:
    """Single-writer, records appended in corpus order."""

    def __init__(self, path, dim: int):
        self.dim = int(dim)
        self._fh = open(path, "wb")
        self._fh.write(_HEADER.pack(MAGIC, VERSION, self.dim))
        self.count = 0

    def write(self, doc_id: int, token_index: int, token: str, vector: np.ndarray) -> None:
        vec = np.asarray(vector, dtype="<f4")
        if vec.shape != (self.dim,):
            raise ValueError(f"vector has shape {vec.shape}, expected ({self.dim},)")
        token_bytes = token.encode("utf-8")
        self._fh.write(_REC_FIXED.pack(doc_id, token_index, len(token_bytes)))
        self._fh.write(token_bytes)
        self._fh.write(vec.tobytes())
        self.count += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_ceb(path) -> tuple[int, list[tuple[int, int, str, np.ndarray]]]:
    """(dim, records); used by the verifier and tests."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, dim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    offset = _HEADER.size
    records = []
    while offset < len(blob):
        start = offset
        if offset + _REC_FIXED.size > len(blob):
            raise ValueError(f"{path}: truncated record at byte offset {start}")
        doc_id, token_index, tok_len = _REC_FIXED.unpack_from(blob, offset)
        offset += _REC_FIXED.size
        if offset + tok_len + 4 * dim > len(blob):
            raise ValueError(f"{path}: truncated record at byte offset {start}")
        token = blob[offset: offset + tok_len].decode("utf-8")
        offset += tok_len
        vec = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset).copy()
        offset += 4 * dim
        records.append((doc_id, token_index, token, vec))
    return dim, records
