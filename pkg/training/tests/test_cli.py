"""Command-line entry points, run in-process."""

import json

import pytest

from seekertrain.cli import main

from helpers import write_synthetic_dataset


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli-data")
    return str(
        write_synthetic_dataset(
            root,
            n_episodes=3,
            n_ticks=10,
            source_fn=lambda e, a, t: "Human" if a == 0 else "Heuristic",
        )
    )


QUICK = ["--epochs", "1", "--steps-per-epoch", "4", "--batch-size", "8", "--lr", "1e-3"]


def test_train_il_writes_checkpoint(data, tmp_path, capsys):
    out = tmp_path / "il"
    rc = main(["train", "--method", "il", "--data", data, "--out", str(out)] + QUICK)
    assert rc == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["method"] == "il"
    assert meta["horizon"] == 1
    assert (out / "weights.pt").exists()
    assert "final val loss" in capsys.readouterr().out


def test_train_il_long_defaults_horizon_five(data, tmp_path):
    out = tmp_path / "il-long"
    rc = main(["train", "--method", "il-long", "--data", data, "--out", str(out)] + QUICK)
    assert rc == 0
    assert json.loads((out / "meta.json").read_text())["horizon"] == 5


def test_train_pe_n_saves_predictor(data, tmp_path):
    out = tmp_path / "pe-n"
    rc = main(["train", "--method", "pe-n", "--data", data, "--out", str(out)] + QUICK)
    assert rc == 0
    import torch

    blobs = torch.load(out / "weights.pt", map_location="cpu", weights_only=True)
    assert "predictor" in blobs


def test_pe_h_requires_both_checkpoints(data, tmp_path):
    rc = main(
        ["train", "--method", "pe-h", "--data", data, "--out", str(tmp_path / "x")] + QUICK
    )
    assert rc == 2


def test_pe_h_from_checkpoints(data, tmp_path):
    base = tmp_path / "base"
    pred = tmp_path / "pred"
    main(["train", "--method", "il-long", "--data", data, "--out", str(base)] + QUICK)
    main(["train", "--method", "pe-t", "--data", data, "--out", str(pred)] + QUICK)
    out = tmp_path / "pe-h"
    rc = main(
        [
            "train", "--method", "pe-h", "--data", data, "--out", str(out),
            "--base", str(base), "--predictor", str(pred),
        ]
        + QUICK
    )
    assert rc == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["method"] == "pe-h"
    assert len(meta["encoder_hashes"]) == 2


def test_finetune_records_source_checkpoint(data, tmp_path):
    ckpt = tmp_path / "il"
    main(["train", "--method", "il", "--data", data, "--out", str(ckpt)] + QUICK)
    out = tmp_path / "ft"
    rc = main(["finetune", "--ckpt", str(ckpt), "--human", data, "--out", str(out)] + QUICK)
    assert rc == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["finetuned_from"] == str(ckpt)
    assert meta["method"] == "il"


def test_unknown_method_rejected(data, tmp_path):
    with pytest.raises(SystemExit):
        main(["train", "--method", "dagger", "--data", data, "--out", str(tmp_path)])
