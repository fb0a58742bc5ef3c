"""Binary framing for bit strings exchanged between pipeline stages.

Layout (little-endian)::

    offset 0   4 bytes  magic b"QKEY"
    offset 4   1 byte   format version (1)
    offset 5   3 bytes  zero padding
    offset 8   8 bytes  number of bits, unsigned
    offset 16  ...      bits packed MSB-first, final byte zero-padded
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"QKEY"
VERSION = 1
_HEADER = struct.Struct("<4sB3xQ")


def encode_bits(bits) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1 or np.any(bits > 1):
        raise ValueError("expected a one-dimensional 0/1 array")
    return _HEADER.pack(MAGIC, VERSION, bits.size) + np.packbits(bits).tobytes()


def decode_bits(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise ValueError("truncated key file header")
    magic, version, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported key file version {version}")
    payload = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size)
    if payload.size != -(-n // 8):
        raise ValueError(f"payload holds {payload.size} bytes, header says {n} bits")
    return np.unpackbits(payload, count=n).astype(np.uint8)


def write_bits(path, bits):
    Path(path).write_bytes(encode_bits(bits))


def read_bits(path) -> np.ndarray:
    return decode_bits(Path(path).read_bytes())
