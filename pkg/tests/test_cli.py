import csv
import json

import numpy as np
import pytest

from tsd.cli import main
from tsd.data.synthetic import sine_frame, write_csv

SMALL = {
    "lookback": 48,
    "horizon": 24,
    "d_model": 8,
    "n_heads": 2,
    "n_blocks": 2,
    "ffn_dim": 8,
    "base_channels": 2,
    "epochs": 2,
    "batch_size": 64,
    "precision": "float64",
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    frame = sine_frame(600, 7, period=24, noise=0.05, seed=1)
    data = write_csv(frame, root / "ETTh1.csv")
    config = root / "small.json"
    config.write_text(json.dumps(SMALL))
    return root, data, config


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def trained(workspace):
    root, data, config = workspace
    out = root / "train-a"
    assert run("train", "--data", data, "--kind", "etth1", "--mode", "uni", "--config", config, "--out", out) == 0
    return out


def test_ingest_summary(workspace, tmp_path, capsys, monkeypatch):
    _, data, _ = workspace
    monkeypatch.setenv("TSD_CACHE_DIR", str(tmp_path / "env-cache"))
    assert run("ingest", "--data", data, "--kind", "etth1") == 0
    out = capsys.readouterr().out
    assert "T=600, C=7, target=OT" in out
    assert "train=[0,420) val=[420,480) test=[480,600)" in out
    assert list((tmp_path / "env-cache").glob("ETTh1-etth1-*.tsf"))
    assert (tmp_path / "env-cache" / "manifest.json").is_file()


def test_ingest_explicit_cache_wins(workspace, tmp_path, monkeypatch):
    _, data, _ = workspace
    monkeypatch.setenv("TSD_CACHE_DIR", str(tmp_path / "env"))
    assert run("ingest", "--data", data, "--kind", "etth1", "--cache", tmp_path / "flag") == 0
    assert list((tmp_path / "flag").glob("*.tsf")) and not (tmp_path / "env").exists()


def test_train_outputs(trained):
    names = sorted(p.name for p in trained.iterdir())
    assert names == ["checkpoint.tsd", "epochs.csv", "manifest.json", "report.csv"]
    header, row = rows(trained / "report.csv")
    assert header == ["dataset", "mode", "horizon", "mse", "mae", "repeats", "seed", "config_hash", "wall_seconds"]
    assert row[:3] == ["ETTh1", "univariate", "24"] and row[-1] == ""
    assert len(rows(trained / "epochs.csv")) == 1 + SMALL["epochs"]
    manifest = json.loads((trained / "manifest.json").read_text())
    assert manifest["command"] == "train"
    assert manifest["params"]["config"]["d_model"] == 8 and manifest["params"]["settings"]["epochs"] == 2


def test_train_is_byte_reproducible(workspace, trained):
    root, data, config = workspace
    out = root / "train-b"
    assert run("train", "--data", data, "--kind", "etth1", "--mode", "uni", "--config", config, "--out", out) == 0
    for name in ("report.csv", "epochs.csv", "checkpoint.tsd"):
        assert (out / name).read_bytes() == (trained / name).read_bytes(), name


def test_rerun_replays_manifest(workspace, trained):
    out = workspace[0] / "rerun"
    assert run("rerun", "--manifest", trained / "manifest.json", "--out", out) == 0
    for name in ("report.csv", "epochs.csv"):
        assert (out / name).read_bytes() == (trained / name).read_bytes()


def test_rerun_detects_changed_data(workspace, trained, tmp_path):
    manifest = json.loads((trained / "manifest.json").read_text())
    manifest["params"]["data"]["sha256"] = "0" * 64
    bad = tmp_path / "manifest.json"
    bad.write_text(json.dumps(manifest))
    assert run("rerun", "--manifest", bad, "--out", tmp_path / "o") == 2


def test_eval_joins_reference(workspace, trained, capsys):
    out = workspace[0] / "eval"
    assert run("eval", "--checkpoint", trained / "checkpoint.tsd", "--out", out) == 0
    comparison = rows(out / "comparison.csv")
    assert comparison[0][5:] == ["ref_source", "ref_model", "ref_variant", "ref_mse", "ref_mae"]
    tsd = [r for r in comparison[1:] if r[6] == "TSD"]
    assert tsd and tsd[0][5:] == ["paper-table-2", "TSD", "", "0.018", "0.102"]
    # eval recomputes the same test metrics train reported
    assert rows(out / "report.csv")[1][3:5] == rows(trained / "report.csv")[1][3:5]


def test_saliency_export(workspace, trained):
    out = workspace[0] / "sal"
    assert run("saliency", "--checkpoint", trained / "checkpoint.tsd", "--window-index", 0, "--out", out) == 0
    maps = sorted(p.name for p in out.glob("*.csv"))
    assert maps == ["saliency_down1.csv", "saliency_down2.csv", "saliency_up1.csv", "saliency_up2.csv"]
    for name in maps:
        body = rows(out / name)[1:]
        assert body and all(float(r[-1]) >= 0 for r in body)
    assert len(rows(out / "saliency_down1.csv")) - 1 == 24  # stride 2 over 48 tokens
    long_out = workspace[0] / "sal-long"
    assert run("saliency", "--checkpoint", trained / "checkpoint.tsd", "--window-index", 3, "--long", "--out", long_out) == 0
    per_channel = rows(long_out / "saliency_long.csv")
    assert per_channel[0] == ["block", "level", "stride", "channel", "token", "value"]
    # (channels, tokens): down1 (2, 24), down2 (4, 12), up2 (4, 24), up1 (2, 48)
    assert len(per_channel) - 1 == 2 * 24 + 4 * 12 + 4 * 24 + 2 * 48
    assert run("saliency", "--checkpoint", trained / "checkpoint.tsd", "--window-index", 10**6, "--out", out) == 2


def test_one_manifest_per_directory(workspace, trained):
    for d in workspace[0].iterdir():
        if d.is_dir():
            assert len(list(d.glob("manifest.json"))) <= 1


def test_gridsearch_and_ablate_on_fixture(tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"d_model": 8, "n_heads": 2, "ffn_dim": 8, "base_channels": 2, "max_steps": 3}))
    grid = tmp_path / "g.json"
    grid.write_text(json.dumps({"axes": {"dropout": [0.05, 0.1]}, "budget": 2}))
    assert run("gridsearch", "--fixture", "sine", "--config", config, "--grid", grid, "--out", tmp_path / "g") == 0
    table = rows(tmp_path / "g" / "grid.csv")
    assert table[0][:3] == ["rank", "trial", "dropout"] and [r[0] for r in table[1:]] == ["1", "2"]
    assert float(table[1][3]) <= float(table[2][3])
    out = tmp_path / "a"
    assert run("ablate", "--fixture", "sine", "--config", config, "--which", "pooling", "--horizons", "24", "--out", out) == 0
    assert [r[3] for r in rows(out / "ablation.csv")[1:]] == ["maxpool", "avgpool"]


@pytest.mark.parametrize(
    "argv, code",
    [
        (["train", "--fixture", "sine"], 2),  # missing --out
        (["frobnicate"], 2),
        (["train", "--data", "/nonexistent.csv", "--kind", "etth1", "--out", "{tmp}/x"], 2),
        (["train", "--fixture", "sine", "--horizon", "25", "--out", "{tmp}/x"], 2),
        (["train", "--fixture", "sine", "--config", "{bogus}", "--out", "{tmp}/x"], 2),
        (["train", "--fixture", "sine", "--config", "{diverge}", "--out", "{tmp}/x"], 3),
        (["gridsearch", "--fixture", "sine", "--grid", "{empty}", "--out", "{tmp}/x"], 2),
        (["train", "--fixture", "sine", "--config", "{tiny}", "--horizon", "25", "--allow-any-horizon", "--out", "{tmp}/x"], 0),
    ],
)
def test_exit_codes(argv, code, tmp_path, capsys):
    files = {
        "bogus": {"not_a_key": 1},
        "diverge": {"learning_rate": 1e200, "d_model": 8, "n_heads": 2, "ffn_dim": 8, "base_channels": 2},
        "empty": {"axes": {}, "budget": 1},
        "tiny": {"d_model": 8, "n_heads": 2, "ffn_dim": 8, "base_channels": 2, "max_steps": 2},
    }
    subs = {"tmp": str(tmp_path)}
    for name, content in files.items():
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(content))
        subs[name] = str(path)
    assert main([a.format(**subs) for a in argv]) == code
    if code:
        assert capsys.readouterr().err.strip()


def test_schema_error_names_the_problem(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("date,a,b\n2016-07-01 00:00:00,1,2\n2016-07-01 01:00:00,1,x\n")
    assert main(["ingest", "--data", str(bad), "--kind", "etth1", "--cache", str(tmp_path)]) == 2
    assert "7" in capsys.readouterr().err
    assert main(["ingest", "--data", str(bad), "--kind", "generic", "--cache", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "row 3" in err and "'b'" in err


def test_module_entry_point():
    import subprocess
    import sys

    done = subprocess.run([sys.executable, "-m", "tsd", "--version"], capture_output=True, text=True)
    assert done.returncode == 0 and done.stdout.startswith("tsd ")
    assert np.__version__  # numpy import path sanity for the subprocess environment
