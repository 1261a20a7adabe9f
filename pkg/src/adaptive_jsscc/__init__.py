"""Saliency-driven block compressed sensing with SNR-adaptive deep joint
source-channel coding over a simulated AWGN channel."""

from .config import VARIANTS, ExperimentConfig, apply_variant, preset_config
from .errors import ConfigError, FingerprintError, GeometryError, TrainingError
from .pipeline import AdaptiveJSSCC, ModelConfig, PipelineOutput

__all__ = [
    "VARIANTS",
    "AdaptiveJSSCC",
    "ConfigError",
    "ExperimentConfig",
    "FingerprintError",
    "GeometryError",
    "ModelConfig",
    "PipelineOutput",
    "TrainingError",
    "apply_variant",
    "preset_config",
]
