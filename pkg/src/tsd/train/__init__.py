"""Losses, optimizer, training loop, evaluation, baselines, search and ablations."""

from tsd.train.ablation import ABLATION_PLAN, AblationRow, ablate_blocks, ablate_pooling
from tsd.train.baselines import SEASONS, NaivePredictor, naive_baselines, persistence, seasonal_naive
from tsd.train.grid import SEARCH_GRID, GridSpec, Trial, grid_search, rank
from tsd.train.loop import TrainResult, TrainSettings, evaluate, partition_metrics, train
from tsd.train.losses import error_metrics, mae, mse
from tsd.train.optim import AdamW, OptimizerState, adamw_step, lr_at
from tsd.train.references import comparison_rows, load_reference, lookup
from tsd.train.report import MetricReport, read_reports, write_reports

__all__ = [
    "ABLATION_PLAN",
    "SEARCH_GRID",
    "SEASONS",
    "AblationRow",
    "AdamW",
    "GridSpec",
    "MetricReport",
    "NaivePredictor",
    "OptimizerState",
    "TrainResult",
    "TrainSettings",
    "Trial",
    "ablate_blocks",
    "ablate_pooling",
    "adamw_step",
    "comparison_rows",
    "error_metrics",
    "evaluate",
    "grid_search",
    "load_reference",
    "lookup",
    "lr_at",
    "mae",
    "mse",
    "naive_baselines",
    "partition_metrics",
    "persistence",
    "rank",
    "read_reports",
    "seasonal_naive",
    "train",
    "write_reports",
]
