class ConfigError(ValueError):
    """Invalid run configuration or argument outside its documented range."""


class GeometryError(ValueError):
    """Tensor shapes or block geometry that do not fit together."""


class FingerprintError(RuntimeError):
    """Checkpoint was written for a different model configuration."""


class TrainingError(RuntimeError):
    """Non-recoverable failure inside the training loop (e.g. a non-finite loss)."""
