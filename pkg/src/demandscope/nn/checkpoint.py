"""Flat binary weight checkpoints.

Layout::

    b"DSCK" | uint32 LE header length | header JSON (utf-8) | raw arrays

The header records the spec digest and full spec, array names, shapes and
dtype, the optimizer step, and free-form metadata. Arrays follow in
declaration order as little-endian raw bytes.
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ValidationError
from .network import NetworkSpec, ParameterStore

MAGIC = b"DSCK"


@dataclass
class Checkpoint:
    spec: NetworkSpec | None
    store: ParameterStore
    meta: dict[str, Any] = field(default_factory=dict)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(ckpt: Checkpoint) -> bytes:
    params = ckpt.store.params
    names = list(params)
    dtypes = {params[k].dtype.str.lstrip("<>|=") for k in names}
    if len(dtypes) > 1:
        raise ValidationError(f"mixed parameter dtypes {sorted(dtypes)}")
    header = {
        "format": 1,
        "spec_hash": ckpt.spec.digest() if ckpt.spec is not None else None,
        "spec": ckpt.spec.to_dict() if ckpt.spec is not None else None,
        "names": names,
        "shapes": [list(params[k].shape) for k in names],
        "dtype": dtypes.pop() if dtypes else "f4",
        "step": ckpt.store.step,
        "meta": ckpt.meta,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<I", len(blob)), blob]
    for k in names:
        a = params[k]
        parts.append(np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<")).tobytes())
    return b"".join(parts)


def loads(data: bytes) -> Checkpoint:
    if data[:4] != MAGIC:
        raise ValidationError("not a demandscope checkpoint")
    (hlen,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8:8 + hlen].decode())
    dtype = np.dtype("<" + header["dtype"])
    off = 8 + hlen
    params = {}
    for name, shape in zip(header["names"], header["shapes"]):
        size = int(np.prod(shape)) * dtype.itemsize
        params[name] = np.frombuffer(data[off:off + size], dtype=dtype).reshape(shape).astype(dtype.newbyteorder("="))
        off += size
    spec = NetworkSpec.from_dict(header["spec"]) if header.get("spec") else None
    if spec is not None and spec.digest() != header["spec_hash"]:
        raise ValidationError("checkpoint spec hash mismatch")
    return Checkpoint(spec, ParameterStore(params, step=header["step"]), header.get("meta", {}))


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    atomic_write_bytes(Path(path), dumps(ckpt))


def load_checkpoint(path) -> Checkpoint:
    return loads(Path(path).read_bytes())
