"""Pooling and depth ablations laid out like the published ablation tables."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from tsd.data.windows import ForecastData
from tsd.model.config import TSDConfig, parameter_count
from tsd.train.loop import TrainSettings, train
from tsd.train.report import MetricReport, format_float

# the eight (dataset, horizon) cells both ablation tables use
ABLATION_PLAN: dict[str, tuple[int, ...]] = {
    "ILI": (24, 36, 48, 60),
    "Exchange": (96, 192, 336, 720),
}
POOLING_VARIANTS = (("maxpool", "max"), ("avgpool", "average"))
DEPTHS = (3, 4, 5)

ABLATION_HEADER = ("dataset", "mode", "horizon", "variant", "mse", "mae", "repeats", "seed", "config_hash", "n_params")

DataFor = Callable[[str, int], ForecastData]


@dataclass(frozen=True)
class AblationRow:
    dataset: str
    horizon: int
    variant: str
    report: MetricReport
    n_params: int

    def row(self) -> list[str]:
        r = self.report
        return [
            self.dataset,
            r.mode,
            str(self.horizon),
            self.variant,
            format_float(r.mse),
            format_float(r.mae),
            str(r.repeats),
            ";".join(str(s) for s in r.seeds),
            r.config_hash,
            str(self.n_params),
        ]


def _run(config: TSDConfig, settings: TrainSettings, data: ForecastData) -> MetricReport:
    return train(config.replace(horizon=data.horizon), settings, data).report


def ablate_pooling(
    base_config: TSDConfig,
    settings: TrainSettings,
    data_for: DataFor,
    plan: dict[str, tuple[int, ...]] = ABLATION_PLAN,
) -> list[AblationRow]:
    """Max vs average pooling per (dataset, horizon); both runs share the seeds."""
    rows = []
    for dataset, horizons in plan.items():
        for horizon in horizons:
            data = data_for(dataset, horizon)
            for variant, pooling in POOLING_VARIANTS:
                config = base_config.replace(pooling=pooling, horizon=horizon)
                rows.append(AblationRow(dataset, horizon, variant, _run(config, settings, data), parameter_count(config)))
    return rows


def ablate_blocks(
    base_config: TSDConfig,
    settings: TrainSettings,
    data_for: DataFor,
    plan: dict[str, tuple[int, ...]] = ABLATION_PLAN,
    depths: tuple[int, ...] = DEPTHS,
) -> list[AblationRow]:
    """One report per block count for each (dataset, horizon)."""
    rows = []
    for dataset, horizons in plan.items():
        for horizon in horizons:
            data = data_for(dataset, horizon)
            for depth in depths:
                config = base_config.replace(n_blocks=depth, horizon=horizon)
                rows.append(AblationRow(dataset, horizon, f"blocks={depth}", _run(config, settings, data), parameter_count(config)))
    return rows
