# Licensed under the MIT License

"""FTEN1: a minimal container of named float64 tensors.

Layout (little-endian, no padding)::

    b"FTEN" u8 version=1 u32 count
    count x [u16 name_len, name, u8 dtype, u8 rank, rank x u32 extent, payload]

dtype 0 is real float64, dtype 1 is complex float64 stored as interleaved
(real, imaginary) pairs. Ranks above 64 are rejected. Reading never raises
anything but :class:`~favs.errors.FtenError` on malformed bytes.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    DuplicateNameError,
    InvalidNameError,
    TruncatedError,
    TrailingDataError,
    UnknownDtypeError,
    UnsupportedRankError,
    UnsupportedVersionError,
    ValidationError,
)
from .logging import debug

MAGIC = b"FTEN"
VERSION = 1
# numpy arrays have at most 64 dimensions
MAX_RANK = 64

DTYPE_REAL = 0
DTYPE_COMPLEX = 1

_ITEMSIZE = {DTYPE_REAL: 8, DTYPE_COMPLEX: 16}
_NUMPY_DTYPE = {DTYPE_REAL: "<f8", DTYPE_COMPLEX: "<c16"}


def check_name(name) -> bytes:
    """Return the encoded name or raise :class:`InvalidNameError`."""
    if not isinstance(name, str) or not name:
        raise InvalidNameError(f"tensor name must be a non-empty string, got {name!r}")
    if not name.isascii() or "\0" in name:
        raise InvalidNameError(f"tensor name must be ASCII without NUL, got {name!r}")
    encoded = name.encode("ascii")
    if len(encoded) > 0xFFFF:
        raise InvalidNameError(f"tensor name longer than 65535 bytes: {name[:32]}...")
    return encoded


def encode_ften(tensors: dict) -> bytes:
    """Serialize named tensors in insertion order.

    Complex arrays are stored as dtype 1, everything else is converted to
    float64.
    """
    chunks = [MAGIC, struct.pack("<BI", VERSION, len(tensors))]
    for name, value in tensors.items():
        encoded = check_name(name)
        array = np.asarray(value)
        if np.iscomplexobj(array):
            code = DTYPE_COMPLEX
        else:
            code = DTYPE_REAL
        if array.ndim > MAX_RANK:
            raise ValidationError(f"tensor {name} has rank {array.ndim} > {MAX_RANK}")
        if any(n > 0xFFFFFFFF for n in array.shape):
            raise ValidationError(f"tensor {name} has an extent beyond 2**32 - 1")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack(f"<BB{array.ndim}I", code, array.ndim, *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype=_NUMPY_DTYPE[code]).tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int, what: str) -> memoryview:
        if n > len(self.data) - self.pos:
            raise TruncatedError(
                f"truncated container: {what} needs {n} bytes at offset {self.pos}, "
                f"{len(self.data) - self.pos} left"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode_ften(data: bytes) -> dict:
    """Parse a container from bytes; raises an :class:`FtenError` subclass on
    any malformed input."""
    r = _Reader(bytes(data))
    magic = bytes(r.data[:4])
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    r.pos = 4
    (version,) = r.unpack("<B", "version")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported container version {version}")
    (count,) = r.unpack("<I", "entry count")
    tensors = {}
    for index in range(count):
        (name_len,) = r.unpack("<H", f"entry {index} name length")
        raw = bytes(r.take(name_len, f"entry {index} name"))
        try:
            name = raw.decode("ascii")
        except UnicodeDecodeError:
            raise InvalidNameError(f"entry {index} name is not ASCII: {raw!r}") from None
        check_name(name)
        if name in tensors:
            raise DuplicateNameError(f"duplicate tensor name {name!r}")
        code, rank = r.unpack("<BB", f"entry {name} header")
        if code not in _ITEMSIZE:
            raise UnknownDtypeError(f"entry {name} has unknown dtype code {code}")
        shape = r.unpack(f"<{rank}I", f"entry {name} extents")
        if rank > MAX_RANK:
            raise UnsupportedRankError(f"entry {name} has rank {rank} > {MAX_RANK}")
        size = 1
        for n in shape:
            size *= n
        payload = r.take(size * _ITEMSIZE[code], f"entry {name} payload")
        dtype = np.complex128 if code else np.float64
        try:
            if size == 0:
                tensors[name] = np.zeros(shape, dtype=dtype)
            else:
                tensors[name] = np.frombuffer(payload, dtype=_NUMPY_DTYPE[code]).reshape(shape).astype(dtype)
        except ValueError as e:
            # older numpy releases stop at 32 dimensions
            raise UnsupportedRankError(f"entry {name} with rank {rank}: {e}") from None
    if r.pos != len(r.data):
        raise TrailingDataError(f"{len(r.data) - r.pos} bytes after the last entry")
    return tensors


def write_ften(path, tensors: dict):
    """Write named tensors to ``path``."""
    data = encode_ften(tensors)
    Path(path).write_bytes(data)
    debug(f"Wrote {len(tensors)} tensors ({len(data)} bytes) to {path}")


def read_ften(path) -> dict:
    """Read named tensors from ``path``.

    Raises
    ------
    OSError
        If the file cannot be read.
    FtenError
        If the bytes are not a valid container.
    """
    return decode_ften(Path(path).read_bytes())
