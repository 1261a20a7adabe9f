"""Model checkpoints: a safetensors parameter map plus a config fingerprint.

Loading against a different architecture is refused. Files are byte-for-byte
reproducible for identical parameters and metadata.
"""

from __future__ import annotations

import json
import struct
from importlib import metadata as _metadata
from pathlib import Path

import torch
from safetensors import safe_open
from safetensors.torch import save_file

from .errors import FingerprintError
from .pipeline import AdaptiveJSSCC, ModelConfig


def code_version() -> str:
    try:
        return _metadata.version("artifact")
    except _metadata.PackageNotFoundError:
        return "0+unknown"


def save_checkpoint(path: str | Path, model: AdaptiveJSSCC, **meta: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensors = {k: v.detach().contiguous().clone() for k, v in model.state_dict().items()}
    header = {
        "fingerprint": model.cfg.fingerprint(),
        "model_config": json.dumps(model.cfg.to_dict(), sort_keys=True),
        "code_version": code_version(),
        **{k: str(v) for k, v in meta.items()},
    }
    save_file(tensors, str(path), metadata=header)
    _canonicalize_header(path)
    return path


def _canonicalize_header(path: Path) -> None:
    # the writer emits metadata in hash-map order; sort it so bytes are reproducible
    raw = path.read_bytes()
    size = struct.unpack("<Q", raw[:8])[0]
    header = json.loads(raw[8 : 8 + size])
    text = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    text += b" " * (-len(text) % 8)
    path.write_bytes(struct.pack("<Q", len(text)) + text + raw[8 + size :])


def read_metadata(path: str | Path) -> dict[str, str]:
    with safe_open(str(path), framework="pt") as f:
        return dict(f.metadata() or {})


def load_checkpoint(path: str | Path, cfg: ModelConfig | None = None) -> AdaptiveJSSCC:
    """Rebuild the model stored at ``path``.

    When ``cfg`` is given its fingerprint must match the stored one.
    """
    meta = read_metadata(path)
    stored = ModelConfig.from_dict(json.loads(meta["model_config"]))
    if cfg is not None and cfg.fingerprint() != meta["fingerprint"]:
        raise FingerprintError(
            f"checkpoint {path} has fingerprint {meta['fingerprint']}, config expects {cfg.fingerprint()}"
        )
    model = AdaptiveJSSCC(stored)
    with safe_open(str(path), framework="pt") as f:
        state = {k: f.get_tensor(k) for k in f.keys()}
    model.load_state_dict(state)
    model.eval()
    return model


def checkpoint_megabytes(path: str | Path) -> float:
    return Path(path).stat().st_size / 1e6


def parameter_megabytes(model: torch.nn.Module) -> float:
    return sum(p.numel() * p.element_size() for p in model.parameters()) / 1e6
