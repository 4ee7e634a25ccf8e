"""Binary array blobs.

Layout: 8-byte magic "MMVAEBLB", u8 dtype code (1=f32, 2=u16, 3=u8), u8 rank,
rank x u32 little-endian shape, then row-major little-endian data.
"""

import struct

import numpy as np

from internal.models.errors import IntegrityError, ShapeError

MAGIC = b"MMVAEBLB"
DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<u2"), 3: np.dtype("u1")}
_CODE_FOR = {dt.str: code for code, dt in DTYPE_CODES.items()}


def encode_blob(array: np.ndarray) -> bytes:
    code = _CODE_FOR.get(np.dtype(array.dtype).newbyteorder("<").str)
    if code is None:
        raise ShapeError(f"unsupported blob dtype {array.dtype}")
    header = MAGIC + struct.pack("<BB", code, array.ndim) + struct.pack(f"<{array.ndim}I", *array.shape)
    return header + np.ascontiguousarray(array, dtype=DTYPE_CODES[code]).tobytes()


def decode_blob(data: bytes) -> np.ndarray:
    if len(data) < len(MAGIC) + 2 or data[:len(MAGIC)] != MAGIC:
        raise IntegrityError("not a blob file (bad magic)")
    code, rank = struct.unpack_from("<BB", data, len(MAGIC))
    if code not in DTYPE_CODES:
        raise IntegrityError(f"unknown blob dtype code {code}")
    offset = len(MAGIC) + 2
    if len(data) < offset + 4 * rank:
        raise IntegrityError("truncated blob header")
    shape = struct.unpack_from(f"<{rank}I", data, offset)
    offset += 4 * rank
    dtype = DTYPE_CODES[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(data) - offset != expected:
        raise IntegrityError(f"blob payload is {len(data) - offset} bytes, expected {expected}")
    return np.frombuffer(data, dtype=dtype, offset=offset).reshape(shape).copy()


def write_blob(path: str, array: np.ndarray):
    with open(path, "wb") as f:
        f.write(encode_blob(array))


def read_blob(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        return decode_blob(f.read())
