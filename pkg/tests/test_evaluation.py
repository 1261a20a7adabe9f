import numpy as np
import pytest
import torch

from adaptive_jsscc.checkpoint import load_checkpoint, save_checkpoint
from adaptive_jsscc.errors import FingerprintError
from adaptive_jsscc.evaluation import (
    EvalReport,
    compare_allocation,
    degradation,
    evaluate,
    load_models,
    memory_report,
    plot_snr_sweep,
    ratio_table,
    sweep_ratio,
    sweep_snr,
)
from adaptive_jsscc.pipeline import AdaptiveJSSCC, ModelConfig

from conftest import TINY_MODEL


@pytest.fixture
def models():
    torch.manual_seed(0)
    return {
        "a": AdaptiveJSSCC(ModelConfig(**TINY_MODEL)),
        "b": AdaptiveJSSCC(ModelConfig(**TINY_MODEL, semantic=False)),
    }


@pytest.fixture
def images():
    return torch.rand(3, 1, 16, 16, generator=torch.Generator().manual_seed(1))


def test_evaluate_is_reproducible(models, images):
    assert evaluate(models["a"], images, 0.5, 10.0, seed=2) == evaluate(models["a"], images, 0.5, 10.0, seed=2)


def test_snr_sweep_rows(models, images):
    rep = sweep_snr(models, [0.0, 10.0, 20.0], images, dataset="toy")
    assert len(rep.rows) == 6
    row = rep.rows[0]
    assert {"dataset", "variant", "ratio", "snr_db", "cbr", "psnr", "ssim", "seed", "fingerprint"} <= set(row)
    assert row["cbr"] == "1/4"
    drops = degradation(rep)
    assert set(drops) == {"a", "b"} and all(d >= 0 for d in drops.values())


def test_ratio_sweep_skips_impossible_ratio(models, images):
    with pytest.warns(UserWarning, match="skipped"):
        rep = sweep_ratio(models, [0.001, 0.1, 0.5], images)
    assert sorted({r["ratio"] for r in rep.rows}) == [0.1, 0.5]


def test_ratio_table_layout(models, images, tmp_path):
    rep = sweep_ratio({"a": models["a"]}, [0.1, 0.5], images, dataset="toy")
    table = ratio_table(rep)
    assert list(table[0]) == ["testset", "method", "r=0.10", "r=0.50"]
    p, s = table[0]["r=0.10"].split("/")
    float(p), float(s)
    EvalReport(rows=table).to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().startswith("testset,method,r=0.10,r=0.50")


def test_compare_allocation_delta(models, images):
    res = compare_allocation(models["a"], models["b"], images, 0.3, 10.0)
    assert res["delta"] == pytest.approx(res["semantic_psnr"] - res["uniform_psnr"])


def test_checkpoint_round_trip_and_refusal(models, images, tmp_path):
    path = save_checkpoint(tmp_path / "a.safetensors", models["a"], seed="0")
    back = load_checkpoint(path, models["a"].cfg)
    assert evaluate(back, images, 0.5, 10.0) == evaluate(models["a"], images, 0.5, 10.0)
    with pytest.raises(FingerprintError):
        load_checkpoint(path, ModelConfig(**{**TINY_MODEL, "n_iter": 3}))


def test_checkpoint_bytes_reproducible(models, tmp_path):
    a = save_checkpoint(tmp_path / "1.safetensors", models["a"], seed="0", epoch="3")
    b = save_checkpoint(tmp_path / "2.safetensors", models["a"], epoch="3", seed="0")
    assert a.read_bytes() == b.read_bytes()


def test_missing_checkpoint_skipped(models, tmp_path):
    path = save_checkpoint(tmp_path / "a.safetensors", models["a"])
    with pytest.warns(UserWarning, match="not found"):
        loaded = load_models({"a": path, "gone": tmp_path / "nope.safetensors"})
    assert list(loaded) == ["a"]


def test_memory_report(models, images, tmp_path):
    paths = {name: save_checkpoint(tmp_path / f"{name}.safetensors", m) for name, m in models.items()}
    rep = sweep_snr(models, [0.0, 20.0], images)
    rows = memory_report({"single": ["a"], "pair": ["a", "b"]}, paths, rep)
    assert rows[1]["megabytes"] > rows[0]["megabytes"]
    assert rows[1]["psnr"] >= rows[0]["psnr"]


def test_plot_is_deterministic(models, images, tmp_path):
    sweep_snr(models, [0.0, 20.0], images).to_csv(tmp_path / "s.csv")
    plot_snr_sweep(tmp_path / "s.csv", tmp_path / "1.png")
    plot_snr_sweep(tmp_path / "s.csv", tmp_path / "2.png")
    assert (tmp_path / "1.png").read_bytes() == (tmp_path / "2.png").read_bytes()
