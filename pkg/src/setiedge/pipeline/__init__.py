"""Config-driven orchestration of the full experiment."""

from .config import ConfigError, HashMismatch, RunConfig, canonical_hash
from .stages import (MetricsReport, TrainingError, TrainResult, cmd_compare, cmd_evaluate,
                     cmd_generate, cmd_metrics_from_cm, cmd_preprocess, cmd_render, cmd_train,
                     evaluate_predictor, load_arm_images, load_manifest, read_matrix_file,
                     split_indices)

__all__ = [
    "ConfigError", "HashMismatch", "MetricsReport", "RunConfig", "TrainResult", "TrainingError",
    "canonical_hash", "cmd_compare", "cmd_evaluate", "cmd_generate", "cmd_metrics_from_cm",
    "cmd_preprocess", "cmd_render", "cmd_train", "evaluate_predictor", "load_arm_images",
    "load_manifest", "read_matrix_file", "split_indices",
]
