"""Binary matrix container and CSV export.

Layout: 8-byte magic ``WEGLMAT1``, u32 little-endian row count, u32 column
count, row-major float64 little-endian payload, then a u32 length prefix and
that many bytes of UTF-8 JSON metadata.
"""

from __future__ import annotations

import json
import struct

import numpy as np

__all__ = ["MAGIC", "save_matrix", "load_matrix", "write_csv"]

MAGIC = b"WEGLMAT1"
_HEADER = struct.Struct("<II")
_LEN = struct.Struct("<I")


def save_matrix(path: str, matrix: np.ndarray, metadata: dict | None = None) -> None:
    matrix = np.ascontiguousarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValueError("only 2-D matrices are stored")
    blob = json.dumps(metadata or {}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(matrix.shape[0], matrix.shape[1]))
        fh.write(matrix.astype("<f8", copy=False).tobytes(order="C"))
        fh.write(_LEN.pack(len(blob)))
        fh.write(blob)


def load_matrix(path: str) -> tuple[np.ndarray, dict]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + _HEADER.size or data[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a WEGLMAT1 file")
    offset = len(MAGIC)
    rows, cols = _HEADER.unpack_from(data, offset)
    offset += _HEADER.size
    payload = rows * cols * 8
    if len(data) < offset + payload + _LEN.size:
        raise ValueError(f"{path}: truncated matrix payload")
    matrix = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=offset)
    matrix = matrix.reshape(rows, cols).astype(np.float64)
    offset += payload
    (blob_len,) = _LEN.unpack_from(data, offset)
    offset += _LEN.size
    if len(data) < offset + blob_len:
        raise ValueError(f"{path}: truncated metadata block")
    metadata = json.loads(data[offset:offset + blob_len].decode("utf-8"))
    return matrix, metadata


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_format(x) for x in row) + "\n")


def _format(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) or isinstance(x, np.floating):
        return repr(float(x))
    return str(x)
