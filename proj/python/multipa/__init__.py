"""Multi-task pronunciation assessment.

Thin Python layer over the C++ core: edit distance, correlation,
completeness scoring, synthetic data, training, evaluation and scoring of
recordings with a trained checkpoint. Configurations are plain dicts with the
same keys as the JSON config file read by the ``multipa`` command-line tool.
"""

from __future__ import annotations

import json
import os
from typing import Any, Mapping, Optional, Union

from ._core import (
    AssessmentUnavailable,
    CheckpointError,
    ConfigError,
    DegenerateInput,
    ModelUnavailable,
    MultipaError,
    PreconditionError,
    SchemaViolation,
    completeness,
    levenshtein,
    pcc,
    sweep_thresholds,
    synthetic_durations,
    write_synthetic_corpus,
)
from . import _core

__all__ = [
    "Assessor",
    "AssessmentUnavailable",
    "CheckpointError",
    "ConfigError",
    "DegenerateInput",
    "ModelUnavailable",
    "MultipaError",
    "PreconditionError",
    "SchemaViolation",
    "completeness",
    "dataset_summary",
    "default_config",
    "evaluate",
    "levenshtein",
    "pcc",
    "sweep_thresholds",
    "synthetic_durations",
    "train",
    "write_synthetic_corpus",
]

Config = Mapping[str, Any]
PathLike = Union[str, "os.PathLike[str]"]


def _encode(config: Optional[Config]) -> str:
    return json.dumps(dict(config or {}), default=os.fspath)


def default_config() -> dict:
    """The complete default configuration."""
    return json.loads(_core._default_config())


def dataset_summary(path: PathLike) -> dict:
    """Validates a dataset directory or manifest; returns utterance ids per
    split and the per-dimension training-label minima."""
    return json.loads(_core._dataset_summary(os.fspath(path)))


def train(config: Config) -> dict:
    """Trains on the train split of ``config["dataset_path"]`` and writes the
    checkpoint to ``config["checkpoint_path"]``. Returns the training log."""
    return json.loads(_core._train(_encode(config)))


def evaluate(config: Config, mode: str = "both", seeds: int = 5) -> dict:
    """Trains one model per seed and reports per-dimension correlations on
    the test split. ``mode`` is "closed", "open" or "both"."""
    return json.loads(_core._evaluate(_encode(config), mode, seeds))


class Assessor:
    """Scores recordings with the checkpoint named in ``config``."""

    def __init__(self, config: Config):
        self._impl = _core._Assessor(_encode(config))

    def assess(self, wav: PathLike, mode: str = "closed", text: Optional[str] = None) -> dict:
        return json.loads(self._impl.assess_file(os.fspath(wav), mode, text))

    def assess_bytes(
        self, data: bytes, mode: str = "closed", text: Optional[str] = None, utterance_id: str = ""
    ) -> dict:
        return json.loads(self._impl.assess_bytes(data, mode, text, utterance_id))
