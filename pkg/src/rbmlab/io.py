"""File formats: RBM1 matrix snapshots, JSON manifests and CSV tables."""
import csv
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"RBM1"
HEADER = struct.Struct("<4sIIBB")
SYMMETRY_CODES = {"symmetric": 0, "hermitian": 1}
DTYPE_REAL, DTYPE_COMPLEX = 0, 1


def write_rbm1(path, matrix, band_width: int, symmetry: str = "symmetric") -> None:
    m = np.asarray(matrix)
    n = m.shape[0]
    if m.shape != (n, n):
        raise ValueError("RBM1 stores square matrices only")
    is_complex = np.iscomplexobj(m)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, n, int(band_width), SYMMETRY_CODES[symmetry],
                             DTYPE_COMPLEX if is_complex else DTYPE_REAL))
        data = np.ascontiguousarray(m, dtype="<c16" if is_complex else "<f8")
        fh.write(data.tobytes())


def read_rbm1(path):
    """Return (matrix, band_width, symmetry)."""
    raw = Path(path).read_bytes()
    magic, n, w, sym, dt = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not an RBM1 file")
    dtype = "<c16" if dt == DTYPE_COMPLEX else "<f8"
    body = np.frombuffer(raw, dtype=dtype, offset=HEADER.size)
    if body.size != n * n:
        raise ValueError(f"{path}: truncated payload")
    symmetry = {v: k for k, v in SYMMETRY_CODES.items()}[sym]
    return body.reshape(n, n).copy(), w, symmetry


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, float) and obj != obj:
        return None
    if isinstance(obj, float) and obj in (float("inf"), float("-inf")):
        return str(obj)
    return obj


def write_json(path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(to_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def save_sample(path, sample) -> None:
    """RBM1 snapshot plus a ``.json`` sidecar with provenance."""
    path = Path(path)
    write_rbm1(path, sample.entries, sample.profile.band_width, sample.symmetry)
    write_json(path.with_suffix(path.suffix + ".json"), {
        "n": sample.n, "w": sample.profile.band_width, "shape": sample.profile.shape,
        "symmetry": sample.symmetry, "seed": sample.seed, "law": sample.law.describe(),
        "provenance": sample.provenance_list(),
    })
