"""Binary file formats for synthetic features and toy model parameters.

Both formats are little-endian, fully deterministic, and versioned:

* features sidecar: magic ``AVQF``, u32 version, u32 sample count, three
  u32 per-modality dims, then per sample the audio, video and question
  vectors as float64;
* model file: magic ``AVQM``, u32 version, u32 parameter count, then per
  parameter a length-prefixed utf-8 name, u8 ndim, u32 dims, float64 data.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

FEATURES_MAGIC = b"AVQF"
MODEL_MAGIC = b"AVQM"
FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def write_features(path: str | Path, features: list[tuple[np.ndarray, np.ndarray, np.ndarray]]) -> None:
    """Write per-sample (audio, video, question) vectors; order matches the corpus file."""
    if not features:
        raise FormatError("no feature rows to write")
    dims = tuple(len(v) for v in features[0])
    with open(path, "wb") as f:
        f.write(FEATURES_MAGIC)
        f.write(struct.pack("<IIIII", FORMAT_VERSION, len(features), *dims))
        for row in features:
            for vec, dim in zip(row, dims):
                vec = np.asarray(vec, dtype="<f8")
                if vec.shape != (dim,):
                    raise FormatError(f"feature vector shape {vec.shape} != ({dim},)")
                f.write(vec.tobytes())


def read_features(path: str | Path) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    with open(path, "rb") as f:
        if f.read(4) != FEATURES_MAGIC:
            raise FormatError(f"{path}: not a features file")
        version, n, da, dv, dq = struct.unpack("<IIIII", f.read(20))
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        rows = []
        for _ in range(n):
            row = []
            for dim in (da, dv, dq):
                buf = f.read(8 * dim)
                if len(buf) != 8 * dim:
                    raise FormatError(f"{path}: truncated feature data")
                row.append(np.frombuffer(buf, dtype="<f8").copy())
            rows.append(tuple(row))
        if f.read(1):
            raise FormatError(f"{path}: trailing bytes after feature data")
    return rows


def write_model(path: str | Path, params: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(params)))
        for name, arr in params.items():
            arr = np.asarray(arr, dtype="<f8")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def read_model(path: str | Path) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    with open(path, "rb") as f:
        if f.read(4) != MODEL_MAGIC:
            raise FormatError(f"{path}: not a model file")
        version, count = struct.unpack("<II", f.read(8))
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        for _ in range(count):
            (name_len,) = struct.unpack("<H", f.read(2))
            name = f.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", f.read(1))
            shape = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
            size = int(np.prod(shape)) if shape else 1
            buf = f.read(8 * size)
            if len(buf) != 8 * size:
                raise FormatError(f"{path}: truncated parameter {name!r}")
            params[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return params
