"""
ADVT binary tensor container.

Single tensor::

    b"ADVT" | version u16 | ndim u32 | dims u32[ndim] | dtype u8 (f32=0, f64=1) | payload

Named-record archive (checkpoints)::

    b"ADVT" | version u16 | 0xFFFFFFFF u32 | count u32 |
        { name_len u32 | name utf-8 | kind u8 (0 tensor, 1 text) | size u64 | body }*

A tensor body is the single-tensor layout without magic and version. All
integers and payloads are little-endian; payloads are row-major.
"""

import struct
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from advstyle_lab.helper.file_utils import PathLike, atomic_write_bytes

MAGIC = b"ADVT"
FORMAT_VERSION = 1
ARCHIVE_MARKER = 0xFFFFFFFF

_TAG_BY_DTYPE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_DTYPE_BY_TAG = {0: np.dtype("<f4"), 1: np.dtype("<f8")}

RecordValue = Union[np.ndarray, str]


def _encode_body(array: np.ndarray) -> bytes:
    array = np.asarray(array)
    if array.dtype not in _TAG_BY_DTYPE:
        raise ValueError(f"ADVT stores float32/float64 only, got {array.dtype}")
    tag = _TAG_BY_DTYPE[array.dtype]
    header = struct.pack("<I", array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape)
    payload = np.ascontiguousarray(array, dtype=_DTYPE_BY_TAG[tag]).tobytes(order="C")
    return header + struct.pack("<B", tag) + payload


def _decode_body(blob: bytes, offset: int) -> Tuple[np.ndarray, int]:
    (ndim,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    dims = struct.unpack_from(f"<{ndim}I", blob, offset)
    offset += 4 * ndim
    (tag,) = struct.unpack_from("<B", blob, offset)
    offset += 1
    if tag not in _DTYPE_BY_TAG:
        raise ValueError(f"unknown ADVT dtype tag {tag}")
    dtype = _DTYPE_BY_TAG[tag]
    count = int(np.prod(dims, dtype=np.int64))
    array = np.frombuffer(blob, dtype=dtype, count=count, offset=offset).reshape(dims)
    offset += count * dtype.itemsize
    return array.astype(dtype.newbyteorder("="), copy=True), offset


def _check_preamble(blob: bytes) -> int:
    if len(blob) < 10 or blob[:4] != MAGIC:
        raise ValueError("not an ADVT container (bad magic)")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported ADVT version {version}")
    return 6


def encode_tensor(array: np.ndarray) -> bytes:
    return MAGIC + struct.pack("<H", FORMAT_VERSION) + _encode_body(array)


def decode_tensor(blob: bytes) -> np.ndarray:
    offset = _check_preamble(blob)
    (ndim,) = struct.unpack_from("<I", blob, offset)
    if ndim == ARCHIVE_MARKER:
        raise ValueError("ADVT file is a named-record archive, not a single tensor")
    array, _ = _decode_body(blob, offset)
    return array


def encode_archive(records: Sequence[Tuple[str, RecordValue]]) -> bytes:
    """
    Encode an ordered list of named tensors and text records.

    Args:
        records: (name, value) pairs; value is an ndarray or a str.

    Returns:
        Archive bytes.
    """
    names = [name for name, _ in records]
    if len(set(names)) != len(names):
        raise ValueError("archive record names must be unique")
    chunks: List[bytes] = [MAGIC, struct.pack("<HII", FORMAT_VERSION, ARCHIVE_MARKER, len(records))]
    for name, value in records:
        encoded_name = name.encode("utf-8")
        if isinstance(value, str):
            kind, body = 1, value.encode("utf-8")
        else:
            kind, body = 0, _encode_body(value)
        chunks.append(struct.pack("<I", len(encoded_name)) + encoded_name)
        chunks.append(struct.pack("<BQ", kind, len(body)) + body)
    return b"".join(chunks)


def decode_archive(blob: bytes) -> Dict[str, RecordValue]:
    offset = _check_preamble(blob)
    marker, count = struct.unpack_from("<II", blob, offset)
    if marker != ARCHIVE_MARKER:
        raise ValueError("ADVT file holds a single tensor, not an archive")
    offset += 8
    records: Dict[str, RecordValue] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        name = blob[offset:offset + name_len].decode("utf-8")
        offset += name_len
        kind, size = struct.unpack_from("<BQ", blob, offset)
        offset += 9
        body = blob[offset:offset + size]
        offset += size
        if kind == 1:
            records[name] = body.decode("utf-8")
        else:
            records[name], _ = _decode_body(body, 0)
    return records


def write_tensor(path: PathLike, array: np.ndarray) -> None:
    atomic_write_bytes(path, encode_tensor(array))


def read_tensor(path: PathLike) -> np.ndarray:
    with open(path, "rb") as handle:
        return decode_tensor(handle.read())


def write_archive(path: PathLike, records: Sequence[Tuple[str, RecordValue]]) -> None:
    atomic_write_bytes(path, encode_archive(records))


def read_archive(path: PathLike) -> Dict[str, RecordValue]:
    with open(path, "rb") as handle:
        return decode_archive(handle.read())
