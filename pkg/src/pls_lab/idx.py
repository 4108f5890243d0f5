"""Reader/writer for the big-endian IDX binary array format.

Layout: a 4-byte magic (0x00000803 for uint8 image stacks with 3
dimensions, 0x00000801 for uint8 label vectors), one big-endian uint32
size per dimension, then the raw uint8 payload in row-major order.
Parse failures carry the byte offset of the problem.
"""

from __future__ import annotations

import numpy as np

from .errors import IdxFormatError

MAGIC_IMAGES = 0x00000803
MAGIC_LABELS = 0x00000801

_NDIM = {MAGIC_IMAGES: 3, MAGIC_LABELS: 1}

# Refuse dimension headers describing more than ~4 GiB of payload.
_MAX_ELEMENTS = 1 << 32


def load_idx(path) -> np.ndarray:
    """Parse an IDX file into a uint8 array of the declared shape."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4:
        raise IdxFormatError("file too short for a magic number", 0)
    magic = int.from_bytes(blob[0:4], "big")
    if magic not in _NDIM:
        raise IdxFormatError(
            f"magic 0x{magic:08x} is not a supported uint8 layout "
            f"(expected 0x{MAGIC_IMAGES:08x} or 0x{MAGIC_LABELS:08x})",
            0,
        )
    ndim = _NDIM[magic]
    header_end = 4 + 4 * ndim
    if len(blob) < header_end:
        raise IdxFormatError("truncated dimension header", len(blob))
    dims = []
    count = 1
    for k in range(ndim):
        offset = 4 + 4 * k
        size = int.from_bytes(blob[offset : offset + 4], "big")
        if size == 0 or size > _MAX_ELEMENTS:
            raise IdxFormatError(f"dimension {k} has invalid size {size}", offset)
        count *= size
        if count > _MAX_ELEMENTS:
            raise IdxFormatError("dimension sizes overflow the payload cap", offset)
        dims.append(size)
    expected = header_end + count
    if len(blob) < expected:
        raise IdxFormatError(
            f"payload truncated: expected {count} bytes, found {len(blob) - header_end}",
            len(blob),
        )
    if len(blob) > expected:
        raise IdxFormatError(f"{len(blob) - expected} trailing bytes", expected)
    data = np.frombuffer(blob, dtype=np.uint8, offset=header_end, count=count)
    return data.reshape(dims).copy()


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array (1-D labels or 3-D image stack) as IDX."""
    array = np.ascontiguousarray(array)
    if array.dtype != np.uint8:
        raise ValueError("IDX writer handles uint8 arrays only")
    if array.ndim == 1:
        magic = MAGIC_LABELS
    elif array.ndim == 3:
        magic = MAGIC_IMAGES
    else:
        raise ValueError("IDX writer handles 1-D or 3-D arrays only")
    with open(path, "wb") as fh:
        fh.write(magic.to_bytes(4, "big"))
        for size in array.shape:
            fh.write(int(size).to_bytes(4, "big"))
        fh.write(array.tobytes())
