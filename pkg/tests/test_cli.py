import csv
import json

import pytest

from adaptive_jsscc.cli import main
from adaptive_jsscc.imaging import write_desk_corpus


@pytest.fixture
def setup(tmp_path, tiny_config, tiny_corpus):
    test_dir = tmp_path / "test"
    write_desk_corpus(test_dir, size=16, n_natural=2, n_synthetic=1, block_size=8, seed=1)
    cfg_path = tmp_path / "cfg.json"
    tiny_config.replace(train_dir=str(tiny_corpus), test_dir=str(test_dir), epochs=1).save(cfg_path)
    return tmp_path, cfg_path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_train_then_eval(setup, capsys):
    root, cfg = setup
    assert main(["train", "--config", str(cfg), "--out", str(root / "run")]) == 0
    ckpt = root / "run" / "best.safetensors"
    assert ckpt.exists()
    code = main(["eval", "--config", str(cfg), "--out", str(root / "ev"), "--checkpoint", f"mine={ckpt}",
                 "--ratio-grid", "0.1,0.5", "--memory"])
    assert code == 0
    rows = _rows(root / "ev" / "ratio_table.csv")
    assert list(rows[0]) == ["testset", "method", "r=0.10", "r=0.50"]
    assert rows[0]["method"] == "mine"
    for name in ("snr_sweep.png", "ratio_sweep.png", "snr_sweep.json", "memory.csv"):
        assert (root / "ev" / name).exists()
    meta = json.loads((root / "ev" / "snr_sweep.json").read_text())["meta"]
    assert {"code_version", "config_hash", "seed"} <= set(meta)


def test_unknown_config_key_exit_code(tmp_path, capsys):
    (tmp_path / "c.json").write_text('{"epoch": 3}')
    assert main(["train", "--config", str(tmp_path / "c.json")]) == 2
    assert "epoch" in capsys.readouterr().err


def test_fingerprint_mismatch_refused(setup, tiny_config, capsys):
    root, cfg = setup
    main(["train", "--config", str(cfg), "--out", str(root / "run")])
    other = root / "other.json"
    tiny_config.replace(n_iter=3).save(other)
    code = main(["eval", "--config", str(other), "--out", str(root / "ev"),
                 "--checkpoint", str(root / "run" / "best.safetensors"), "--data", str(root / "test")])
    assert code == 2
    assert "does not match" in capsys.readouterr().err


def test_empty_dataset_is_fatal(setup, capsys):
    root, cfg = setup
    (root / "empty").mkdir()
    main(["train", "--config", str(cfg), "--out", str(root / "run")])
    code = main(["eval", "--config", str(cfg), "--out", str(root / "ev"),
                 "--checkpoint", str(root / "run" / "best.safetensors"), "--data", str(root / "empty")])
    assert code == 2
    assert "empty" in capsys.readouterr().err


def test_output_root_from_environment(setup, monkeypatch):
    root, cfg = setup
    monkeypatch.setenv("AJSSCC_OUT", str(root / "envout"))
    assert main(["train", "--config", str(cfg)]) == 0
    assert (root / "envout" / "best.safetensors").exists()


def test_ablate_and_report(setup, caplog, capsys):
    root, cfg = setup
    out = root / "abl"
    assert main(["ablate", "--config", str(cfg), "--out", str(out)]) == 0
    rows = _rows(out / "ablation.csv")
    assert [r["variant"] for r in rows] == ["Adaptive-JSSCC", "Adaptive-JSCC", "JSSCC", "JSCC"]
    assert {"semantic", "acam", "train_snr", "mean_psnr", "worst_drop", "semantic_vs_uniform_delta"} <= set(rows[0])
    assert rows[0]["semantic_vs_uniform_delta"] != "" and rows[1]["semantic_vs_uniform_delta"] == ""
    assert rows[2]["train_snr"] == "19"
    stamp = (out / "JSCC" / "best.safetensors").stat().st_mtime_ns

    caplog.set_level("INFO")
    assert main(["ablate", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "JSCC" / "best.safetensors").stat().st_mtime_ns == stamp
    assert "cached checkpoint" in caplog.text

    capsys.readouterr()
    assert main(["report", "--out", str(out)]) == 0
    assert "Adaptive-JSSCC" in capsys.readouterr().out


def test_report_without_csvs(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == 2
