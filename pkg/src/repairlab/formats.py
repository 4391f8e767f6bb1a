"""VF01 field files, VT01 trajectory files, and small CSV/JSON helpers.

VF01: ``b"VF01"``, then uint32 LE ``C, H, W``, then ``C*H*W`` float64 LE values,
component-major then row-major.

VT01: ``b"VT01"``, uint32 LE ``T``, uint32 LE ``C, H, W``, then ``T`` frames of
``C*H*W`` float64 LE values each.
"""

import csv
import hashlib
import io
import json
import struct

import numpy as np


class FormatError(ValueError):
    """Malformed VF01/VT01 payload."""


_F64 = np.dtype("<f8")


def encode_field(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 2:
        a = a[None]
    if a.ndim != 3:
        raise FormatError(f"field must be 2-D or 3-D, got shape {a.shape}")
    C, H, W = a.shape
    return b"VF01" + struct.pack("<III", C, H, W) + np.ascontiguousarray(a, dtype=_F64).tobytes()


def decode_field(buf):
    if len(buf) < 16 or buf[:4] != b"VF01":
        raise FormatError("missing VF01 magic")
    C, H, W = struct.unpack("<III", buf[4:16])
    n = C * H * W
    if len(buf) != 16 + 8 * n:
        raise FormatError(f"VF01 payload has {len(buf) - 16} bytes, expected {8 * n}")
    return np.frombuffer(buf, dtype=_F64, count=n, offset=16).reshape(C, H, W).astype(np.float64)


def encode_trajectory(frames):
    a = np.asarray(frames, dtype=np.float64)
    if a.ndim != 4:
        raise FormatError(f"trajectory must have shape (T, C, H, W), got {a.shape}")
    T, C, H, W = a.shape
    return b"VT01" + struct.pack("<IIII", T, C, H, W) + np.ascontiguousarray(a, dtype=_F64).tobytes()


def decode_trajectory(buf):
    if len(buf) < 20 or buf[:4] != b"VT01":
        raise FormatError("missing VT01 magic")
    T, C, H, W = struct.unpack("<IIII", buf[4:20])
    n = T * C * H * W
    if len(buf) != 20 + 8 * n:
        raise FormatError(f"VT01 payload has {len(buf) - 20} bytes, expected {8 * n}")
    return np.frombuffer(buf, dtype=_F64, count=n, offset=20).reshape(T, C, H, W).astype(np.float64)


def write_field(path, a):
    with open(path, "wb") as fh:
        fh.write(encode_field(a))


def read_field(path):
    with open(path, "rb") as fh:
        return decode_field(fh.read())


def write_trajectory(path, frames):
    with open(path, "wb") as fh:
        fh.write(encode_trajectory(frames))


def read_trajectory(path):
    with open(path, "rb") as fh:
        return decode_trajectory(fh.read())


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fmt_num(x):
    """Full-precision scientific notation (17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.16e}"
    return str(x)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_num(row[k]) if isinstance(row, dict) else fmt_num(k) for k in
                    (header if isinstance(row, dict) else row)])
    return buf.getvalue()


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(csv_text(header, rows))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
