"""Binary checkpoint container.

Layout (all integers little-endian)::

    magic        4 bytes   b"TSD1"
    version      uint32    1
    header_len   uint32
    header       UTF-8 JSON {"config": {...}, "meta": {...}}
    n_params     uint32
    repeated n_params times, in declaration order:
        name_len uint16, name UTF-8
        ndim     uint8, dims uint32 * ndim
        data     float64 little-endian, C order

Loading rebuilds the model from the config and rejects the file unless the
stored scalar count equals :func:`parameter_count` of that config.
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from tsd.errors import CheckpointError, TSDError
from tsd.model.config import TSDConfig, parameter_count
from tsd.model.tsd import TSDModel

MAGIC = b"TSD1"
VERSION = 1


def save_checkpoint(path, model: TSDModel, meta: dict[str, Any] | None = None) -> None:
    header = json.dumps({"config": model.config.to_dict(), "meta": meta or {}}, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(header)))
    buf.write(header)
    params = list(model.named_parameters())
    buf.write(struct.pack("<I", len(params)))
    for name, p in params:
        raw = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", p.ndim))
        buf.write(struct.pack(f"<{p.ndim}I", *p.shape))
        buf.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())
    Path(path).write_bytes(buf.getvalue())


def _read(stream: io.BytesIO, n: int) -> bytes:
    chunk = stream.read(n)
    if len(chunk) != n:
        raise CheckpointError("checkpoint truncated")
    return chunk


def load_checkpoint(path) -> tuple[TSDModel, dict[str, Any]]:
    stream = io.BytesIO(Path(path).read_bytes())
    magic = stream.read(4)
    if magic != MAGIC:
        raise CheckpointError(f"bad checkpoint magic {magic!r}, expected {MAGIC!r}")
    version, header_len = struct.unpack("<II", _read(stream, 8))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(_read(stream, header_len).decode("utf-8"))
        config = TSDConfig.from_dict(header["config"])
    except (ValueError, KeyError, TypeError, TSDError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    (count,) = struct.unpack("<I", _read(stream, 4))
    state = {}
    total = 0
    for _ in range(count):
        (name_len,) = struct.unpack("<H", _read(stream, 2))
        name = _read(stream, name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", _read(stream, 1))
        shape = struct.unpack(f"<{ndim}I", _read(stream, 4 * ndim))
        n = int(np.prod(shape, dtype=np.int64))
        state[name] = np.frombuffer(_read(stream, 8 * n), dtype="<f8").reshape(shape).astype(np.float64)
        total += n
    if stream.read(1):
        raise CheckpointError("trailing bytes after parameter blobs")
    expected = parameter_count(config)
    if total != expected:
        raise CheckpointError(f"checkpoint holds {total} scalars, config implies {expected}")
    model = TSDModel(config)
    try:
        model.load_state_dict(state)
    except TSDError as exc:
        raise CheckpointError(str(exc)) from exc
    return model, header.get("meta", {})
