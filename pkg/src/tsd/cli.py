"""``tsd`` command line: ingest, train, eval, gridsearch, ablate, saliency, rerun.

Exit codes: 0 success, 2 usage/config/schema/data errors, 3 numerical failure.
Every artifact-producing command writes one ``manifest.json`` next to its
outputs; ``tsd rerun --manifest FILE`` replays it from the resolved values
stored there.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import json
import sys
import warnings
from pathlib import Path
from typing import Any

from tsd import __version__
from tsd.data import DISPLAY_NAMES, KINDS, file_sha256, load_frame, prepare
from tsd.data.io import cache_dir, cached_frame_path
from tsd.data.split import split_boundaries
from tsd.data.synthetic import sine_windows
from tsd.data.windows import ForecastData
from tsd.errors import ConfigurationError, NumericalError, TSDError, UsageError
from tsd.model import TSDConfig, extract_saliency, load_checkpoint, save_checkpoint
from tsd.presets import DESK_CONFIG, DESK_SETTINGS, SINE_CONFIG, SINE_SETTINGS
from tsd.train import (
    ABLATION_PLAN,
    GridSpec,
    TrainSettings,
    ablate_blocks,
    ablate_pooling,
    comparison_rows,
    evaluate,
    grid_search,
    train,
    write_reports,
)
from tsd.train.ablation import ABLATION_HEADER
from tsd.train.references import COMPARISON_HEADER
from tsd.train.report import format_float, write_csv

BENCHMARK_HORIZONS = (24, 36, 48, 60, 96, 168, 192, 288, 336, 672, 720)
MODE_NAMES = {"multi": "multivariate", "uni": "univariate"}
FIXTURES = ("sine",)
DATA_KEYS = frozenset({"stride"})
EPOCH_HEADER = ("seed", "epoch", "steps", "lr", "train_loss", "val_mse", "val_mae")
MANIFEST = "manifest.json"


# -- shared plumbing ----------------------------------------------------------


def write_manifest(out: Path, command: str, params: dict[str, Any]) -> Path:
    manifest = {
        "command": command,
        "params": params,
        "out": str(out),
        "timestamp": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        "version": __version__,
    }
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected a JSON object")
    return data


def split_config(flat: dict[str, Any], base_config: TSDConfig, base_settings: TrainSettings):
    """Route flat JSON keys to TSDConfig, TrainSettings or data options; unknown keys fail."""
    config_keys = {f.name for f in dataclasses.fields(TSDConfig)}
    settings_keys = {f.name for f in dataclasses.fields(TrainSettings)}
    unknown = sorted(set(flat) - config_keys - settings_keys - DATA_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown config key(s): {', '.join(unknown)}")
    c = {k: v for k, v in flat.items() if k in config_keys}
    s = {k: v for k, v in flat.items() if k in settings_keys}
    d = {k: v for k, v in flat.items() if k in DATA_KEYS}
    return base_config.to_dict() | c, base_settings.to_dict() | s, d


def data_params(args) -> dict[str, Any]:
    if getattr(args, "fixture", None):
        return {"fixture": args.fixture}
    if not getattr(args, "data", None):
        raise UsageError("pass --data PATH (with --kind) or --fixture sine")
    path = Path(args.data)
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    return {"path": str(path.resolve()), "kind": args.kind, "sha256": file_sha256(path)}


def load_data(source: dict[str, Any], lookback: int, horizon: int, mode: str, stride: int = 1, calendar: bool = False) -> ForecastData:
    if "fixture" in source:
        if source["fixture"] != "sine":
            raise ConfigurationError(f"unknown fixture {source['fixture']!r}")
        if calendar:
            raise ConfigurationError("the sine fixture has no timestamps for calendar covariates")
        return sine_windows(lookback=lookback, horizon=horizon)
    path = Path(source["path"])
    if not path.is_file():
        raise FileNotFoundError(f"no such data file: {path}")
    if source.get("sha256") and file_sha256(path) != source["sha256"]:
        raise ConfigurationError(f"{path} changed since the manifest was written (sha256 mismatch)")
    frame = load_frame(path, source["kind"])
    name = DISPLAY_NAMES.get(source["kind"], path.stem)
    return prepare(frame, lookback, horizon, mode, stride, calendar, name)


def n_channels_for(source: dict[str, Any], mode: str) -> int:
    if "fixture" in source or mode == "univariate":
        return 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # gaps are reported by ingest
        return load_frame(source["path"], source["kind"]).n_channels


def check_horizon(horizon: int, allow_any: bool) -> None:
    if horizon < 1:
        raise UsageError(f"horizon must be positive, got {horizon}")
    if not allow_any and horizon not in BENCHMARK_HORIZONS:
        raise UsageError(f"horizon {horizon} is not in {BENCHMARK_HORIZONS}; pass --allow-any-horizon to override")


def resolve_run(args) -> dict[str, Any]:
    """Merge defaults, the config file and flags into fully resolved run parameters."""
    source = data_params(args)
    fixture = "fixture" in source
    base_config, base_settings = (SINE_CONFIG, SINE_SETTINGS) if fixture else (DESK_CONFIG, DESK_SETTINGS)
    flat = read_json(args.config) if args.config else {}
    config, settings, extra = split_config(flat, base_config, base_settings)
    mode = MODE_NAMES[args.mode]
    if getattr(args, "horizon", None) is not None:
        check_horizon(args.horizon, args.allow_any_horizon)
        config["horizon"] = args.horizon
    if args.seed is not None:
        settings["seed"] = args.seed
    config["n_channels"] = n_channels_for(source, mode)
    # construct once so bad values fail before any work starts
    TSDConfig.from_dict(config)
    TrainSettings.from_dict(settings)
    return {
        "config": config,
        "settings": settings,
        "data": source,
        "mode": mode,
        "stride": int(extra.get("stride", 1)),
        "record_timing": bool(getattr(args, "record_timing", False)),
    }


def out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands -----------------------------------------------------------------


def do_ingest(params: dict[str, Any], out: Path) -> int:
    source = params["data"]
    path = Path(source["path"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        frame = load_frame(path, source["kind"], out)
    train_end, val_end = split_boundaries(frame.n_rows)
    print(f"T={frame.n_rows}, C={frame.n_channels}, target={frame.target_name}")
    print(f"split: train=[0,{train_end}) val=[{train_end},{val_end}) test=[{val_end},{frame.n_rows})")
    gaps = frame.gaps()
    print(f"gaps: {len(gaps)}")
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    print(f"cache: {cached_frame_path(out, path, source['kind'])}")
    write_manifest(out, "ingest", params)
    return 0


def cmd_ingest(args) -> int:
    source = data_params(args)
    out = cache_dir(args.cache) or Path.home() / ".cache" / "tsd"
    out.mkdir(parents=True, exist_ok=True)
    return do_ingest({"data": source}, out)


def do_train(params: dict[str, Any], out: Path) -> int:
    config = TSDConfig.from_dict(params["config"])
    settings = TrainSettings.from_dict(params["settings"])
    data = load_data(params["data"], config.lookback, config.horizon, params["mode"], params["stride"], config.calendar_covariates)
    result = train(config, settings, data, record_time=params["record_timing"])
    meta = {
        "dataset": data.name,
        "mode": data.mode,
        "data": params["data"],
        "stride": params["stride"],
        "config_hash": result.report.config_hash,
        "settings": settings.to_dict(),
    }
    save_checkpoint(out / "checkpoint.tsd", result.model, meta)
    write_csv(out / "epochs.csv", EPOCH_HEADER, [[str(h["seed"]), str(h["epoch"]), str(h["steps"])] + [format_float(h[k]) for k in EPOCH_HEADER[3:]] for h in result.history])
    report = result.report
    write_reports(out / "report.csv", [report])
    fit = evaluate(result.model, data, "train")
    print(f"trained {result.steps} steps; train mse={fit.mse:.6g} mae={fit.mae:.6g}")
    print(f"test mse={report.mse:.6g} mae={report.mae:.6g} (mean of {report.repeats} run(s))")
    write_manifest(out, "train", params)
    return 0


def cmd_train(args) -> int:
    params = resolve_run(args)
    return do_train(params, out_dir(args.out))


def _checkpoint_data(meta: dict[str, Any], model, args) -> tuple[dict[str, Any], ForecastData]:
    source = data_params(args) if (args.data or args.fixture) else meta.get("data")
    if not source:
        raise UsageError("checkpoint has no data record; pass --data or --fixture")
    if args.kind and "path" in source:
        source = {**source, "kind": args.kind}
    cfg = model.config
    data = load_data(source, cfg.lookback, cfg.horizon, meta.get("mode", "multivariate"), meta.get("stride", 1), cfg.calendar_covariates)
    return source, data


def do_eval(params: dict[str, Any], out: Path) -> int:
    model, meta = load_checkpoint(params["checkpoint"])
    args = argparse.Namespace(data=None, fixture=None, kind=None)
    meta = {**meta, "data": params["data"]}
    _, data = _checkpoint_data(meta, model, args)
    seed = meta.get("settings", {}).get("seed", 0)
    report = evaluate(model, data, "test", meta.get("config_hash", ""), (seed,))
    write_reports(out / "report.csv", [report])
    write_csv(out / "comparison.csv", COMPARISON_HEADER, comparison_rows([report]))
    print(f"{data.name} {data.mode} H={data.horizon}: mse={report.mse:.6g} mae={report.mae:.6g}")
    write_manifest(out, "eval", params)
    return 0


def cmd_eval(args) -> int:
    model, meta = load_checkpoint(args.checkpoint)
    source, _ = _checkpoint_data(meta, model, args)
    params = {"checkpoint": str(Path(args.checkpoint).resolve()), "checkpoint_sha256": file_sha256(args.checkpoint), "data": source}
    return do_eval(params, out_dir(args.out))


def do_gridsearch(params: dict[str, Any], out: Path) -> int:
    config = TSDConfig.from_dict(params["config"])
    settings = TrainSettings.from_dict(params["settings"])
    grid = GridSpec.from_dict(params["grid"])
    data = load_data(params["data"], config.lookback, config.horizon, params["mode"], params["stride"], config.calendar_covariates)
    trials = grid_search(grid, config, settings, data, params.get("workers", 1))
    axes = list(grid.axes)
    header = ("rank", "trial", *axes, "val_loss", "val_mse", "val_mae", "n_params", "config_hash")
    rows = []
    for rank, t in enumerate(trials, 1):
        merged = t.config.to_dict() | t.settings.to_dict()
        rows.append(
            [str(rank), str(t.index)]
            + [json.dumps(merged[a]) for a in axes]
            + [format_float(t.val_loss), format_float(t.val_report.mse), format_float(t.val_report.mae), str(t.n_params), t.config_hash]
        )
    write_csv(out / "grid.csv", header, rows)
    print(f"{len(trials)} trial(s); best val loss {trials[0].val_loss:.6g} (trial {trials[0].index})")
    write_manifest(out, "gridsearch", params)
    return 0


def cmd_gridsearch(args) -> int:
    params = resolve_run(args)
    grid = read_json(args.grid)
    if args.budget is not None:
        grid["budget"] = args.budget
    GridSpec.from_dict(grid)
    params["grid"] = {k: (sorted(v) if k == "extended" else v) for k, v in grid.items()}
    params["workers"] = args.workers
    return do_gridsearch(params, out_dir(args.out))


def do_ablate(params: dict[str, Any], out: Path) -> int:
    config = TSDConfig.from_dict(params["config"])
    settings = TrainSettings.from_dict(params["settings"])
    source = params["data"]
    name = params["dataset"]
    plan = {name: tuple(params["horizons"])}

    def data_for(_dataset: str, horizon: int) -> ForecastData:
        return load_data(source, config.lookback, horizon, params["mode"], params["stride"], config.calendar_covariates)

    run = ablate_pooling if params["which"] == "pooling" else ablate_blocks
    rows = run(config, settings, data_for, plan)
    write_csv(out / "ablation.csv", ABLATION_HEADER, [r.row() for r in rows])
    comparison = []
    for r in rows:
        rep = dataclasses.replace(r.report, dataset=r.dataset)
        comparison.extend(comparison_rows([rep], r.variant))
    write_csv(out / "comparison.csv", COMPARISON_HEADER, comparison)
    print(f"{len(rows)} ablation row(s) for {name}")
    write_manifest(out, "ablate", params)
    return 0


def cmd_ablate(args) -> int:
    params = resolve_run(args)
    source = params["data"]
    name = args.dataset_name or ("sine" if "fixture" in source else DISPLAY_NAMES.get(source["kind"], Path(source["path"]).stem))
    if args.horizons:
        horizons = [int(h) for h in args.horizons.split(",")]
    elif name in ABLATION_PLAN:
        horizons = list(ABLATION_PLAN[name])
    else:
        raise UsageError(f"no default ablation horizons for {name!r}; pass --horizons")
    for h in horizons:
        check_horizon(h, args.allow_any_horizon)
    params.update({"which": args.which, "dataset": name, "horizons": horizons})
    return do_ablate(params, out_dir(args.out))


def do_saliency(params: dict[str, Any], out: Path) -> int:
    model, meta = load_checkpoint(params["checkpoint"])
    args = argparse.Namespace(data=None, fixture=None, kind=None)
    _, data = _checkpoint_data({**meta, "data": params["data"]}, model, args)
    k = params["window_index"]
    if not 0 <= k < len(data.test):
        raise UsageError(f"window index {k} out of range; the test partition has {len(data.test)} windows")
    maps = extract_saliency(model, data.test.inputs[k])
    long_rows = []
    for m in maps:
        per_token = m.channel_mean_abs
        write_csv(
            out / f"saliency_{m.block}.csv",
            ("token", "stride", "channel_mean_abs"),
            [[str(j), str(m.token_stride), format_float(v)] for j, v in enumerate(per_token)],
        )
        for c in range(m.values.shape[0]):
            for j in range(m.n_tokens):
                long_rows.append([m.block, str(m.level), str(m.token_stride), str(c), str(j), format_float(m.values[c, j])])
    if params.get("long"):
        write_csv(out / "saliency_long.csv", ("block", "level", "stride", "channel", "token", "value"), long_rows)
    print(f"{len(maps)} saliency map(s) for test window {k} (origin {int(data.test.origins[k])})")
    write_manifest(out, "saliency", params)
    return 0


def cmd_saliency(args) -> int:
    model, meta = load_checkpoint(args.checkpoint)
    source, _ = _checkpoint_data(meta, model, args)
    params = {"checkpoint": str(Path(args.checkpoint).resolve()), "data": source, "window_index": args.window_index, "long": args.long}
    return do_saliency(params, out_dir(args.out))


REPLAY = {
    "ingest": do_ingest,
    "train": do_train,
    "eval": do_eval,
    "gridsearch": do_gridsearch,
    "ablate": do_ablate,
    "saliency": do_saliency,
}


def cmd_rerun(args) -> int:
    manifest = read_json(args.manifest)
    command = manifest.get("command")
    if command not in REPLAY:
        raise ConfigurationError(f"manifest command {command!r} is not replayable")
    out = out_dir(args.out or manifest["out"])
    return REPLAY[command](manifest["params"], out)


# -- parser -------------------------------------------------------------------


def _add_data(p, required_kind: bool = False) -> None:
    p.add_argument("--data", help="benchmark CSV path")
    p.add_argument("--kind", choices=sorted(KINDS), default=None if not required_kind else "generic", help="dataset kind (default: generic)")
    p.add_argument("--fixture", choices=FIXTURES, help="built-in synthetic data instead of --data")


def _add_run(p) -> None:
    _add_data(p, required_kind=True)
    p.add_argument("--config", help="flat JSON of TSDConfig/TrainSettings keys")
    p.add_argument("--mode", choices=sorted(MODE_NAMES), default="multi")
    p.add_argument("--seed", type=int)
    p.add_argument("--allow-any-horizon", action="store_true")
    p.add_argument("--out", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsd", description="Temporal saliency detection forecaster")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a CSV, cache the frame, print a summary")
    _add_data(p, required_kind=True)
    p.add_argument("--cache", help="cache directory (default $TSD_CACHE_DIR or ~/.cache/tsd)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train and report test metrics")
    _add_run(p)
    p.add_argument("--horizon", type=int, help="forecast horizon (default from config)")
    p.add_argument("--record-timing", action="store_true", help="fill wall_seconds (makes reports run-dependent)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint and join the reference rows")
    p.add_argument("--checkpoint", required=True)
    _add_data(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gridsearch", help="rank a hyperparameter grid on validation loss")
    _add_run(p)
    p.add_argument("--grid", required=True, help='JSON {"axes": {...}, "budget": N, "extended": [...]}')
    p.add_argument("--budget", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("ablate", help="pooling or depth ablation")
    _add_run(p)
    p.add_argument("--which", choices=("pooling", "blocks"), required=True)
    p.add_argument("--horizons", help="comma-separated horizons (default: the ablation-table set for the dataset)")
    p.add_argument("--dataset-name", help="label used in the output rows")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("saliency", help="export per-block saliency maps for one test window")
    p.add_argument("--checkpoint", required=True)
    _add_data(p)
    p.add_argument("--window-index", type=int, required=True)
    p.add_argument("--long", action="store_true", help="also write per-channel values to saliency_long.csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("rerun", help="replay a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="output directory (default: the manifest's)")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse usage errors already exit 2
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (TSDError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
