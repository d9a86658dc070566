"""Metric records and their CSV form."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

REPORT_HEADER = ("dataset", "mode", "horizon", "mse", "mae", "repeats", "seed", "config_hash", "wall_seconds")


def format_float(value: float | None) -> str:
    """Shortest round-tripping text; empty for ``None``."""
    return "" if value is None else repr(float(value))


@dataclass(frozen=True)
class MetricReport:
    """Mean test (or validation) errors over ``repeats`` runs.

    ``seeds`` are joined with ``;`` in the CSV ``seed`` column.  ``wall_seconds``
    stays ``None`` unless timing was requested, so reports of identical runs
    serialize to identical bytes.
    """

    dataset: str
    mode: str
    horizon: int
    mse: float
    mae: float
    repeats: int = 1
    seeds: tuple[int, ...] = (0,)
    config_hash: str = ""
    wall_seconds: float | None = None

    def __post_init__(self):
        if not (self.mse >= 0 and self.mae >= 0):
            raise ValueError(f"metrics must be nonnegative, got mse={self.mse}, mae={self.mae}")

    def row(self) -> list[str]:
        return [
            self.dataset,
            self.mode,
            str(self.horizon),
            format_float(self.mse),
            format_float(self.mae),
            str(self.repeats),
            ";".join(str(s) for s in self.seeds),
            self.config_hash,
            format_float(self.wall_seconds),
        ]

    @classmethod
    def from_row(cls, row: dict[str, str]) -> "MetricReport":
        return cls(
            row["dataset"],
            row["mode"],
            int(row["horizon"]),
            float(row["mse"]),
            float(row["mae"]),
            int(row["repeats"]),
            tuple(int(s) for s in row["seed"].split(";") if s),
            row["config_hash"],
            float(row["wall_seconds"]) if row["wall_seconds"] else None,
        )


def write_csv(path, header, rows) -> Path:
    """UTF-8, comma-delimited, ``\\n`` line endings, header first."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path = Path(path)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_reports(path, reports) -> Path:
    return write_csv(path, REPORT_HEADER, [r.row() for r in reports])


def read_reports(path) -> list[MetricReport]:
    return [MetricReport.from_row(row) for row in read_csv(path)]
