"""In-memory time series table and its columnar binary form."""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from tsd.errors import ParseError, SchemaError

FRAME_MAGIC = b"TSF1"
FRAME_VERSION = 1


@dataclass(frozen=True, eq=False)
class TimeSeriesFrame:
    """Evenly sampled multichannel series.

    Attributes:
        timestamps: ``datetime64[ns]`` array of length ``T``, strictly increasing.
        values: ``[T, C]`` float64 matrix without NaN.
        channel_names: column names, one per channel.
        target_index: which channel is the forecast target.
        kind: dataset kind the file was validated against.
    """

    timestamps: np.ndarray
    values: np.ndarray
    channel_names: tuple[str, ...]
    target_index: int
    kind: str = "generic"

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.channel_names):
            raise SchemaError(f"values shape {self.values.shape} does not match {len(self.channel_names)} channel names")
        if len(self.timestamps) != self.values.shape[0]:
            raise SchemaError(f"{len(self.timestamps)} timestamps for {self.values.shape[0]} rows")
        if not 0 <= self.target_index < len(self.channel_names):
            raise SchemaError(f"target_index {self.target_index} outside [0, {len(self.channel_names)})")
        if np.isnan(self.values).any():
            rows = np.unique(np.nonzero(np.isnan(self.values))[0])[:10]
            raise ParseError(f"NaN values at data rows {rows.tolist()}")
        self.values.setflags(write=False)
        self.timestamps.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    @property
    def target_name(self) -> str:
        return self.channel_names[self.target_index]

    def gaps(self) -> list[tuple[int, np.timedelta64]]:
        """Rows whose spacing to the previous row differs from the dominant step."""
        if self.n_rows < 3:
            return []
        deltas = np.diff(self.timestamps.astype("int64"))
        step_values, counts = np.unique(deltas, return_counts=True)
        step = step_values[np.argmax(counts)]
        bad = np.nonzero(deltas != step)[0]
        return [(int(i) + 1, np.timedelta64(int(deltas[i]), "ns")) for i in bad]

    def calendar_features(self) -> np.ndarray:
        """``[T, 4]``: sin/cos of hour-of-day and of day-of-week."""
        ns = self.timestamps.astype("datetime64[ns]")
        hours = (ns - ns.astype("datetime64[D]")).astype("int64") / 3.6e12
        days = (ns.astype("datetime64[D]").astype("int64") + 3) % 7  # 1970-01-01 was a Thursday
        hour_angle = 2 * np.pi * hours / 24.0
        day_angle = 2 * np.pi * days / 7.0
        return np.stack([np.sin(hour_angle), np.cos(hour_angle), np.sin(day_angle), np.cos(day_angle)], axis=1)

    def equals(self, other: "TimeSeriesFrame") -> bool:
        return self.to_bytes() == other.to_bytes()

    # -- serialization ---------------------------------------------------

    def to_bytes(self) -> bytes:
        """Columnar layout::

            magic "TSF1", uint32 version, uint32 header_len, JSON header
            int64[T] timestamps (ns since epoch)
            float64[T] per channel, in channel order
        """
        header = json.dumps(
            {
                "kind": self.kind,
                "channels": list(self.channel_names),
                "target_index": self.target_index,
                "rows": self.n_rows,
            },
            sort_keys=True,
        ).encode("utf-8")
        buf = io.BytesIO()
        buf.write(FRAME_MAGIC)
        buf.write(struct.pack("<II", FRAME_VERSION, len(header)))
        buf.write(header)
        buf.write(np.ascontiguousarray(self.timestamps.astype("datetime64[ns]").astype("<i8")).tobytes())
        for c in range(self.n_channels):
            buf.write(np.ascontiguousarray(self.values[:, c], dtype="<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "TimeSeriesFrame":
        if blob[:4] != FRAME_MAGIC:
            raise SchemaError(f"not a frame file (magic {blob[:4]!r})")
        version, header_len = struct.unpack("<II", blob[4:12])
        if version != FRAME_VERSION:
            raise SchemaError(f"unsupported frame version {version}")
        header = json.loads(blob[12 : 12 + header_len].decode("utf-8"))
        t, c = header["rows"], len(header["channels"])
        offset = 12 + header_len
        if len(blob) != offset + 8 * t * (c + 1):
            raise SchemaError("frame file truncated or padded")
        stamps = np.frombuffer(blob, "<i8", t, offset).astype("datetime64[ns]")
        cols = np.frombuffer(blob, "<f8", t * c, offset + 8 * t).reshape(c, t)
        return cls(stamps.copy(), np.ascontiguousarray(cols.T, dtype=np.float64), tuple(header["channels"]), header["target_index"], header["kind"])

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "TimeSeriesFrame":
        return cls.from_bytes(Path(path).read_bytes())
