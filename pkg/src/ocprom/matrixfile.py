"""Binary container for named float64 matrices.

Layout (little endian)::

    magic      8 bytes   b"OCPROM1\\0"
    kind      16 bytes   ASCII payload tag, NUL padded
    n_meta     u32       then n_meta records: u16 key length, key,
                         u32 value length, value (UTF-8)
    n_entries  u32       then per entry: u16 name length, name,
                         u64 rows, u64 cols, rows*cols f8 in C order
    crc32      u32       of every preceding byte
"""

import os
import struct
import zlib

import numpy as np

MAGIC = b"OCPROM1\0"


class MatrixFileError(ValueError):
    """Corrupt file, wrong kind or bad checksum."""


def _pack_str(s, fmt):
    b = s.encode("utf-8")
    return struct.pack(fmt, len(b)) + b


def dumps(kind, arrays, meta=None):
    """Serialize ``arrays`` (name -> array).  Vectors are stored as columns
    and arrays of higher rank flattened to ``(shape[0], -1)``."""
    if len(kind.encode()) > 16:
        raise MatrixFileError("kind tag longer than 16 bytes")
    parts = [MAGIC, kind.encode().ljust(16, b"\0")]
    meta = {str(k): str(v) for k, v in (meta or {}).items()}
    parts.append(struct.pack("<I", len(meta)))
    for k in sorted(meta):
        parts += [_pack_str(k, "<H"), _pack_str(meta[k], "<I")]
    parts.append(struct.pack("<I", len(arrays)))
    for name in arrays:
        a = np.asarray(arrays[name], dtype="<f8")
        if a.ndim == 0:
            a = a.reshape(1, 1)
        elif a.ndim == 1:
            a = a[:, None]
        elif a.ndim > 2:
            a = a.reshape(a.shape[0], -1)
        parts += [_pack_str(name, "<H"), struct.pack("<QQ", *a.shape),
                  np.ascontiguousarray(a).tobytes()]
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def loads(data, kind=None):
    """Return ``(kind, meta, arrays)``; column vectors come back 2-D."""
    if len(data) < len(MAGIC) + 24 or data[:8] != MAGIC:
        raise MatrixFileError("not an OCPROM1 file")
    body, crc = data[:-4], struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(body) != crc:
        raise MatrixFileError("checksum mismatch")
    got = body[8:24].rstrip(b"\0").decode()
    if kind is not None and got != kind:
        raise MatrixFileError(f"expected a {kind!r} file, found {got!r}")
    pos = 24

    def take(n):
        nonlocal pos
        if pos + n > len(body):
            raise MatrixFileError("truncated file")
        pos += n
        return body[pos - n:pos]

    def string(fmt):
        (n,) = struct.unpack(fmt, take(struct.calcsize(fmt)))
        return take(n).decode("utf-8")

    meta = {}
    (nm,) = struct.unpack("<I", take(4))
    for _ in range(nm):
        k = string("<H")
        meta[k] = string("<I")
    arrays = {}
    (ne,) = struct.unpack("<I", take(4))
    for _ in range(ne):
        name = string("<H")
        r, c = struct.unpack("<QQ", take(16))
        arrays[name] = np.frombuffer(take(8 * r * c), dtype="<f8").reshape(r, c).copy()
    if pos != len(body):
        raise MatrixFileError("trailing bytes after the last entry")
    return got, meta, arrays


def save(path, kind, arrays, meta=None):
    data = dumps(kind, arrays, meta)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load(path, kind=None):
    with open(path, "rb") as fh:
        return loads(fh.read(), kind)
