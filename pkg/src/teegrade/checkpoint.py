"""Binary checkpoint format.

Layout: magic bytes ``TEEG``, 4-byte little-endian format version, 8-byte
little-endian header length, a UTF-8 JSON header (architecture spec, run
metadata, ordered tensor directory with name/shape/dtype/offset), then raw
little-endian tensor payloads in directory order. Offsets are relative to
the start of the payload section.

The header JSON is canonicalised (sorted keys, no whitespace), so
save -> load -> save reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import ParamStore
from .errors import DataError
from .models import Model, ModelSpec

MAGIC = b"TEEG"
FORMAT_VERSION = 1

_DTYPES = {"float64": "<f8", "float32": "<f4"}


@dataclass
class Checkpoint:
    """An on-disk model: spec, parameters, training metadata, storage dtype."""

    spec: ModelSpec
    params: dict[str, np.ndarray]  # float64 in memory regardless of storage dtype
    metadata: dict = field(default_factory=dict)
    score_scale: float = 100.0
    dtype: str = "float64"
    version: int = FORMAT_VERSION

    @classmethod
    def from_model(cls, model: Model, metadata: dict | None = None, dtype: str = "float64"):
        if dtype not in _DTYPES:
            raise DataError(f"unsupported checkpoint dtype {dtype!r}")
        return cls(
            spec=model.spec,
            params={k: v.copy() for k, v in model.store.params.items()},
            metadata=dict(metadata or {}),
            score_scale=model.score_scale,
            dtype=dtype,
        )

    def to_model(self) -> Model:
        return Model(self.spec, ParamStore(self.params), self.score_scale)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    np_dtype = _DTYPES[ckpt.dtype]
    directory = []
    payload = []
    offset = 0
    for name, tensor in ckpt.params.items():
        raw = np.ascontiguousarray(tensor, dtype=np_dtype).tobytes()
        directory.append(
            {
                "name": name,
                "shape": list(tensor.shape),
                "dtype": ckpt.dtype,
                "offset": offset,
            }
        )
        payload.append(raw)
        offset += len(raw)
    header = {
        "spec": ckpt.spec.to_dict(),
        "score_scale": ckpt.score_scale,
        "metadata": ckpt.metadata,
        "tensors": directory,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    blob = b"".join(
        [
            MAGIC,
            struct.pack("<I", ckpt.version),
            struct.pack("<Q", len(header_bytes)),
            header_bytes,
        ]
        + payload
    )
    Path(path).write_bytes(blob)


def load_checkpoint(path) -> Checkpoint:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise DataError(f"{path}: not a checkpoint file (bad magic)")
    version = struct.unpack("<I", blob[4:8])[0]
    header_len = struct.unpack("<Q", blob[8:16])[0]
    header = json.loads(blob[16 : 16 + header_len].decode())
    body = blob[16 + header_len :]
    params: dict[str, np.ndarray] = {}
    dtype = "float64"
    for entry in header["tensors"]:
        dtype = entry["dtype"]
        np_dtype = _DTYPES[dtype]
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = entry["offset"]
        itemsize = np.dtype(np_dtype).itemsize
        raw = body[start : start + count * itemsize]
        arr = np.frombuffer(raw, dtype=np_dtype).reshape(entry["shape"])
        params[entry["name"]] = arr.astype(np.float64)
    return Checkpoint(
        spec=ModelSpec.from_dict(header["spec"]),
        params=params,
        metadata=header["metadata"],
        score_scale=header["score_scale"],
        dtype=dtype,
        version=version,
    )
