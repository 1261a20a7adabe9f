"""Train a small model on a generated corpus, then sweep SNR and sampling ratio.

Takes a couple of minutes on one CPU core. Outputs land in ./demo_run.
"""

import logging
from pathlib import Path

from adaptive_jsscc.checkpoint import load_checkpoint
from adaptive_jsscc.config import preset_config
from adaptive_jsscc.evaluation import format_table, ratio_table, sweep_ratio, sweep_snr
from adaptive_jsscc.imaging import HELDOUT_IMAGES, TRAIN_IMAGES, ImageFolder, write_desk_corpus
from adaptive_jsscc.training import train_run

logging.basicConfig(level=logging.INFO, format="%(message)s")
root = Path("demo_run")
write_desk_corpus(root / "train", n_natural=24, n_synthetic=8, names=TRAIN_IMAGES, seed=0)
write_desk_corpus(root / "test", n_natural=8, n_synthetic=0, names=HELDOUT_IMAGES, seed=1)

cfg = preset_config("desk").replace(train_dir=str(root / "train"), epochs=6, lr_schedule=[[0, 1e-3], [5, 1e-4]])
result = train_run(cfg, root / "model")
model = load_checkpoint(result.checkpoint)

images = ImageFolder(root / "test", 64).tensor()
snr = sweep_snr({"Adaptive-JSSCC": model}, [0, 10, 20], images, dataset="heldout")
print(format_table([{k: r[k] for k in ("snr_db", "psnr", "ssim")} for r in snr.rows]))
print()
print(format_table(ratio_table(sweep_ratio({"Adaptive-JSSCC": model}, [0.01, 0.1, 0.5], images, dataset="heldout"))))
