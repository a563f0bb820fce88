"""Deterministic RNG derivation, canonical JSON, and tensor-file IO.

Everything here exists to keep runs bit-reproducible: RNG streams are
derived from (seed, string tags) via sha256 rather than Python's salted
hash(), JSON is always emitted with sorted keys, and tensors are written
in a custom header+blob format because zip-based formats embed
timestamps.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any, Mapping

import numpy as np

TENSOR_FILE_MAGIC = b"SDTENSOR"
TENSOR_FILE_VERSION = 1


def derive_rng(seed: int, *tags: object) -> np.random.Generator:
    """A Generator whose stream depends only on (seed, tags)."""
    material = json.dumps([int(seed), *[str(t) for t in tags]]).encode()
    digest = hashlib.sha256(material).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def fingerprint(obj: Any) -> str:
    """Stable sha256 fingerprint of a JSON-serializable object."""
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, ensure_ascii=False).encode()
    ).hexdigest()[:16]


def save_tensors(path: str, tensors: Mapping[str, np.ndarray], meta: dict | None = None) -> None:
    """Write named float64 arrays with a JSON shape header. Deterministic bytes."""
    names = sorted(tensors)
    header = {
        "version": TENSOR_FILE_VERSION,
        "meta": meta or {},
        "tensors": [{"name": n, "shape": list(tensors[n].shape)} for n in names],
    }
    header_bytes = canonical_json(header).encode()
    with open(path, "wb") as f:
        f.write(TENSOR_FILE_MAGIC)
        f.write(len(header_bytes).to_bytes(8, "little"))
        f.write(header_bytes)
        for n in names:
            f.write(np.ascontiguousarray(tensors[n], dtype="<f8").tobytes())


def load_tensors(path: str) -> tuple[dict[str, np.ndarray], dict]:
    """Read a tensor file; raises ValueError on shape/format mismatch."""
    with open(path, "rb") as f:
        magic = f.read(len(TENSOR_FILE_MAGIC))
        if magic != TENSOR_FILE_MAGIC:
            raise ValueError(f"not a tensor file: {path}")
        header_len = int.from_bytes(f.read(8), "little")
        header = json.loads(f.read(header_len).decode())
        if header["version"] != TENSOR_FILE_VERSION:
            raise ValueError(f"unsupported tensor file version {header['version']}")
        tensors: dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = f.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"truncated tensor {entry['name']} in {path}")
            tensors[entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return tensors, header["meta"]


def stable_token_hash(token: str, seed: int) -> int:
    digest = hashlib.sha256(f"{seed}\x00{token}".encode()).digest()
    return int.from_bytes(digest[:8], "little")
