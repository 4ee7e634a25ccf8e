"""Deterministic, versioned checkpoint files.

File layout:
  magic "MMVAECKP" | u32 version | u64 payload length | sha256(payload) | payload

The payload is the checkpoint state written with torch.save and read back with
torch.load(weights_only=True). Only plain containers, scalars, strings and
real-valued tensors are accepted, so save -> load -> save reproduces the file
byte for byte.
"""

import hashlib
import io
import logging
import os
import pickle
import struct
import zipfile

import torch

from internal.models.errors import CheckpointVersionError, IntegrityError, ShapeError

logger = logging.getLogger(__name__)

MAGIC = b"MMVAECKP"
VERSION = 2
_PREFIX = struct.Struct("<IQ")
_DIGEST_SIZE = 32

_TENSOR_DTYPES = frozenset({
    torch.float32, torch.float64, torch.int64, torch.int32, torch.uint8, torch.bool,
})


def _check_values(obj, where: str = "state"):
    if isinstance(obj, torch.Tensor):
        if obj.dtype not in _TENSOR_DTYPES:
            raise ShapeError(f"{where}: cannot checkpoint tensors of dtype {obj.dtype}")
    elif isinstance(obj, dict):
        for key, value in obj.items():
            if not isinstance(key, (str, int)):
                raise ShapeError(f"{where}: checkpoint keys must be str or int, got {type(key).__name__}")
            _check_values(value, f"{where}.{key}")
    elif isinstance(obj, (list, tuple)):
        for i, value in enumerate(obj):
            _check_values(value, f"{where}[{i}]")
    elif not (obj is None or isinstance(obj, (bool, int, float, str))):
        raise ShapeError(f"{where}: cannot checkpoint value of type {type(obj).__name__}")


def encode_checkpoint(state: dict) -> bytes:
    _check_values(state)
    buffer = io.BytesIO()
    torch.save(state, buffer)
    payload = buffer.getvalue()
    digest = hashlib.sha256(payload).digest()
    return MAGIC + _PREFIX.pack(VERSION, len(payload)) + digest + payload


def decode_checkpoint(data: bytes) -> dict:
    start = len(MAGIC) + _PREFIX.size + _DIGEST_SIZE
    if len(data) < start or data[:len(MAGIC)] != MAGIC:
        raise IntegrityError("not a checkpoint file (bad magic or truncated header)")
    version, length = _PREFIX.unpack_from(data, len(MAGIC))
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint version {version}, this build reads {VERSION}")
    payload = data[start:]
    if len(payload) != length:
        raise IntegrityError(f"checkpoint payload is {len(payload)} bytes, header says {length}")
    if hashlib.sha256(payload).digest() != data[start - _DIGEST_SIZE:start]:
        raise IntegrityError("checkpoint checksum mismatch")
    try:
        return torch.load(io.BytesIO(payload), map_location="cpu", weights_only=True)
    except (pickle.UnpicklingError, zipfile.BadZipFile, RuntimeError) as e:
        raise IntegrityError(f"checkpoint payload is unreadable: {e}") from e


def save_checkpoint(state: dict, path: str):
    data = encode_checkpoint(state)
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)
    logger.debug("Wrote checkpoint %s (%d bytes)", path, len(data))


def load_checkpoint(path: str) -> dict:
    with open(path, "rb") as f:
        return decode_checkpoint(f.read())
