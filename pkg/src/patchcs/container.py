"""Little-endian binary container shared by measurement-matrix and model files.

Layout::

    offset 0   8 bytes   magic  b"PATCHCS\\0"
    offset 8   u32       format version (1)
    offset 12  u32       header length L in bytes
    offset 16  L bytes   UTF-8 JSON header (sorted keys), containing a
                         "tensors" list of {"name", "shape"} entries
    offset 16+L          float64 blobs, one per tensor, in header order,
                         row-major, little-endian; nothing follows the last blob

Identical inputs give byte-identical files.
"""

import json
import struct

import numpy as np

from .errors import FormatError

MAGIC = b"PATCHCS\0"
VERSION = 1
_PREFIX = struct.Struct("<8sII")


def write_container(path, header, tensors):
    """Write ``header`` (JSON-serialisable dict) and ``tensors`` (name -> array)."""
    header = dict(header)
    header["tensors"] = [{"name": name, "shape": list(np.shape(a))} for name, a in tensors.items()]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_PREFIX.pack(MAGIC, VERSION, len(blob)))
        f.write(blob)
        for a in tensors.values():
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_container(path):
    """Return ``(header, tensors)``; raises FormatError on any inconsistency."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _PREFIX.size:
        raise FormatError("file too short for container prefix", offset=len(data))
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}", offset=8)
    start = _PREFIX.size
    if start + hlen > len(data):
        raise FormatError("truncated header", offset=len(data))
    try:
        header = json.loads(data[start : start + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable header: {exc}", offset=start) from None
    pos = start + hlen
    tensors = {}
    for entry in header.get("tensors", []):
        shape = tuple(int(s) for s in entry["shape"])
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if pos + nbytes > len(data):
            raise FormatError(f"truncated tensor {entry['name']!r}", offset=len(data))
        a = np.frombuffer(data, dtype="<f8", count=nbytes // 8, offset=pos)
        tensors[entry["name"]] = a.astype(np.float64).reshape(shape)
        pos += nbytes
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} trailing bytes after last tensor", offset=pos)
    return header, tensors
