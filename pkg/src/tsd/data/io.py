"""CSV ingestion for the benchmark files, with row/column-addressed errors."""

from __future__ import annotations

import hashlib
import os
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from tsd.data.frame import TimeSeriesFrame
from tsd.errors import ParseError, SchemaError

# kind -> (value column count or None for any, target column name or None for "last")
KINDS = {
    "etth1": (7, "OT"),
    "etth2": (7, "OT"),
    "ettm1": (7, "OT"),
    "ili": (7, None),
    "exchange": (8, None),
    "generic": (None, None),
}

DISPLAY_NAMES = {
    "etth1": "ETTh1",
    "etth2": "ETTh2",
    "ettm1": "ETTm1",
    "ili": "ILI",
    "exchange": "Exchange",
}

DATE_FORMATS = ("%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%d", "%Y/%m/%d %H:%M:%S", "%Y/%m/%d %H:%M", "%Y/%m/%d")


class GapWarning(UserWarning):
    """Timestamps are not evenly spaced; nothing is imputed."""


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _parse_dates(column: pd.Series) -> np.ndarray:
    text = column.str.strip()
    for fmt in DATE_FORMATS:
        parsed = pd.to_datetime(text, format=fmt, errors="coerce")
        if not parsed.isna().any():
            return parsed.to_numpy(dtype="datetime64[ns]")
    # report the first row no format accepts
    ok = np.zeros(len(text), dtype=bool)
    for fmt in DATE_FORMATS:
        ok |= pd.to_datetime(text, format=fmt, errors="coerce").notna().to_numpy()
    if ok.all():
        raise ParseError("column 'date' mixes several date formats")
    row = int(np.argmin(ok))
    raise ParseError(f"row {row + 2}, column 'date': cannot parse {column.iloc[row]!r} as a date")


def load_csv(path, kind: str = "generic") -> TimeSeriesFrame:
    """Read a benchmark CSV into a validated frame.

    Row numbers in error messages are file line numbers (the header is line 1).

    Args:
        path: CSV with a header row whose first column is ``date``.
        kind: one of ``etth1, etth2, ettm1, ili, exchange, generic``.

    Raises:
        SchemaError: wrong header or column count.
        ParseError: unparsable or missing cell, or non-increasing timestamps.
    """
    if kind not in KINDS:
        raise SchemaError(f"unknown dataset kind {kind!r}; expected one of {sorted(KINDS)}")
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    columns = [str(c).strip() for c in raw.columns]
    if not columns or columns[0] != "date":
        raise SchemaError(f"{path}: first column must be 'date', found {columns[:1]}")
    value_columns = columns[1:]
    expected, target = KINDS[kind]
    if expected is not None and len(value_columns) != expected:
        raise SchemaError(f"{path}: kind {kind} expects {expected} value columns, found {len(value_columns)}: {value_columns}")
    if not value_columns:
        raise SchemaError(f"{path}: no value columns after 'date'")
    if target is None and kind == "generic" and "OT" in value_columns:
        target = "OT"
    if target is not None and target not in value_columns:
        raise SchemaError(f"{path}: kind {kind} expects target column {target!r}, found {value_columns}")
    target_index = value_columns.index(target) if target is not None else len(value_columns) - 1
    if len(raw) == 0:
        raise SchemaError(f"{path}: no data rows")

    stamps = _parse_dates(raw.iloc[:, 0])
    values = np.empty((len(raw), len(value_columns)), dtype=np.float64)
    for j, name in enumerate(value_columns):
        text = raw.iloc[:, j + 1].str.strip()
        empty = (text == "").to_numpy()
        if empty.any():
            row = int(np.argmax(empty))
            raise ParseError(f"{path}: row {row + 2}, column {name!r}: missing value")
        numbers = pd.to_numeric(text, errors="coerce").to_numpy(dtype=np.float64)
        bad = np.isnan(numbers) & ~text.str.lower().isin(["nan"]).to_numpy()
        if bad.any():
            row = int(np.argmax(bad))
            raise ParseError(f"{path}: row {row + 2}, column {name!r}: cannot parse {text.iloc[row]!r}")
        if np.isnan(numbers).any():
            row = int(np.argmax(np.isnan(numbers)))
            raise ParseError(f"{path}: row {row + 2}, column {name!r}: NaN value")
        values[:, j] = numbers

    steps = np.diff(stamps.astype("int64"))
    if (steps <= 0).any():
        row = int(np.argmax(steps <= 0)) + 1
        raise ParseError(f"{path}: row {row + 2}: timestamp not after the previous row")
    frame = TimeSeriesFrame(stamps, values, tuple(value_columns), target_index, kind)
    gaps = frame.gaps()
    if gaps:
        shown = ", ".join(f"row {r + 2} (+{d})" for r, d in gaps[:5])
        warnings.warn(f"{path}: {len(gaps)} irregular step(s): {shown}", GapWarning, stacklevel=2)
    return frame


def cache_dir(explicit=None) -> Path | None:
    """``explicit`` wins, then ``$TSD_CACHE_DIR``; ``None`` means no caching."""
    if explicit:
        return Path(explicit)
    env = os.environ.get("TSD_CACHE_DIR")
    return Path(env) if env else None


def cached_frame_path(directory: Path, path, kind: str) -> Path:
    return Path(directory) / f"{Path(path).stem}-{kind}-{file_sha256(path)[:16]}.tsf"


def load_frame(path, kind: str = "generic", cache=None) -> TimeSeriesFrame:
    """``load_csv`` with an optional content-addressed cache of the binary frame."""
    directory = cache_dir(cache)
    if directory is None:
        return load_csv(path, kind)
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    target = cached_frame_path(directory, path, kind)
    if target.is_file():
        return TimeSeriesFrame.load(target)
    frame = load_csv(path, kind)
    directory.mkdir(parents=True, exist_ok=True)
    frame.save(target)
    return frame
