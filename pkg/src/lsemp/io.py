"""Path export: CSV (``replicate,index,value``) and the LSE1 binary matrix."""

import csv
import struct

import numpy as np

MAGIC = b"LSE1"
HEADER = struct.Struct("<4sIII")  # magic, rows, cols, reserved


def write_csv(path, values):
    """Write rows as ``replicate,index,value``; ``path`` may be an open text stream."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if hasattr(path, "write"):
        _write_rows(path, values)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, values)


def _write_rows(fh, values):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["replicate", "index", "value"])
    for r, row in enumerate(values):
        for i, v in enumerate(row, start=1):
            w.writerow([r, i, repr(float(v))])


def read_csv(path):
    rows = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["replicate", "index", "value"]:
            raise ValueError(f"{path}: expected header replicate,index,value")
        for rec in reader:
            if not rec:
                continue
            rows.setdefault(int(rec[0]), {})[int(rec[1])] = float(rec[2])
    if not rows:
        raise ValueError(f"{path}: no observations")
    reps = sorted(rows)
    n = max(max(r) for r in rows.values())
    out = np.full((len(reps), n), np.nan)
    for j, r in enumerate(reps):
        for i, v in rows[r].items():
            out[j, i - 1] = v
    return out


def write_binary(path, values):
    values = np.atleast_2d(np.asarray(values, dtype="<f8"))
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, rows, cols, 0))
        fh.write(np.ascontiguousarray(values).tobytes(order="C"))


def read_binary(path):
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, rows, cols, _ = HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).astype(float)


def read_paths(path):
    """Read a path matrix from either format, sniffing the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_binary(path)
    return read_csv(path)
