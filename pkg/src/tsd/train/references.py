"""Published result rows, shipped as a static CSV and joined into comparison reports.

Values stay strings end to end so they render exactly as printed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from tsd.train.report import MetricReport, format_float

REFERENCE_HEADER = ("source", "dataset", "mode", "horizon", "model", "variant", "mse", "mae")
COMPARISON_HEADER = (
    "dataset",
    "mode",
    "horizon",
    "mse",
    "mae",
    "ref_source",
    "ref_model",
    "ref_variant",
    "ref_mse",
    "ref_mae",
)


@dataclass(frozen=True)
class ReferenceRow:
    source: str
    dataset: str
    mode: str
    horizon: int
    model: str
    variant: str
    mse: str
    mae: str


@lru_cache(maxsize=1)
def load_reference() -> tuple[ReferenceRow, ...]:
    text = resources.files("tsd.references").joinpath("reference_results.csv").read_text(encoding="utf-8")
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != REFERENCE_HEADER:
        raise ValueError(f"reference fixture header {reader.fieldnames} != {REFERENCE_HEADER}")
    return tuple(
        ReferenceRow(r["source"], r["dataset"], r["mode"], int(r["horizon"]), r["model"], r["variant"], r["mse"], r["mae"])
        for r in reader
    )


def lookup(dataset: str, mode: str, horizon: int, variant: str = "", model: str | None = None) -> list[ReferenceRow]:
    return [
        r
        for r in load_reference()
        if r.dataset == dataset
        and r.mode == mode
        and r.horizon == horizon
        and r.variant == variant
        and (model is None or r.model == model)
    ]


def comparison_rows(reports: list[MetricReport], variant: str = "") -> list[list[str]]:
    """One row per (report, matching reference row); a report without references gets one row with empty ref fields."""
    rows = []
    for rep in reports:
        ours = [rep.dataset, rep.mode, str(rep.horizon), format_float(rep.mse), format_float(rep.mae)]
        refs = lookup(rep.dataset, rep.mode, rep.horizon, variant)
        if not refs:
            rows.append(ours + ["", "", "", "", ""])
        for ref in refs:
            rows.append(ours + [ref.source, ref.model, ref.variant, ref.mse, ref.mae])
    return rows
