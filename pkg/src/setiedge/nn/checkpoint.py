"""Checkpoint files: a text header followed by little-endian float payloads.

Layout::

    SETIEDGE-CKPT <format version> <header bytes>\\n
    <JSON header: tensors [{name, dtype, shape, offset, nbytes}], config_hash, meta>\\n
    <payload, tensors concatenated in header order>
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = "SETIEDGE-CKPT"
FORMAT_VERSION = 1
_DTYPES = {"f4": np.dtype("<f4"), "f8": np.dtype("<f8")}


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: dict, config_hash: str, meta: dict | None = None) -> None:
    entries, chunks, offset = [], [], 0
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        code = "f8" if arr.dtype == np.float64 else "f4"
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
        entries.append({"name": name, "dtype": code, "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps({"format_version": FORMAT_VERSION, "config_hash": config_hash,
                         "tensors": entries, "meta": meta or {}}, sort_keys=True).encode()
    first = f"{MAGIC} {FORMAT_VERSION} {len(header)}\n".encode()
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(first + header + b"\n" + b"".join(chunks))
    tmp.replace(path)


def load_checkpoint(path):
    """Return ``(tensors, header)``; raises :class:`CheckpointError` on malformed files."""
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    try:
        magic, version, hlen = data[:nl].decode().split()
        version, hlen = int(version), int(hlen)
    except ValueError as exc:
        raise CheckpointError(f"{path}: malformed checkpoint preamble") from exc
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    start = nl + 1
    try:
        header = json.loads(data[start:start + hlen])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt header") from exc
    payload = data[start + hlen + 1:]
    tensors = {}
    for e in header["tensors"]:
        if e["name"] in tensors:
            raise CheckpointError(f"{path}: duplicate tensor {e['name']}")
        end = e["offset"] + e["nbytes"]
        if end > len(payload):
            raise CheckpointError(f"{path}: payload truncated at tensor {e['name']}")
        dt = _DTYPES[e["dtype"]]
        arr = np.frombuffer(payload[e["offset"]:end], dtype=dt).reshape(e["shape"])
        tensors[e["name"]] = arr.astype(dt.newbyteorder("="))
    return tensors, header
