# -*- coding: utf-8 -*-
"""Exception types raised by the lab, each mapped to a CLI exit code."""

from typing import Any, Dict, Optional

from sdlab.utils.constants import (
    EXIT_CALIBRATION_ERROR, EXIT_CONFIG_ERROR, EXIT_DATA_INTEGRITY_ERROR, EXIT_FAILURE,
)


class SdlabError(Exception):
    """Base class for all lab failures."""
    exit_code = EXIT_FAILURE


class ConfigError(SdlabError):
    """Invalid or missing configuration."""
    exit_code = EXIT_CONFIG_ERROR


class CalibrationToleranceError(SdlabError):
    """The calibration population cannot meet the requested P_FA tolerance."""
    exit_code = EXIT_CALIBRATION_ERROR

    def __init__(self, message: str, required_trials: int):
        super().__init__(message)
        self.required_trials = required_trials


class DataIntegrityError(SdlabError):
    """A stored artifact failed a checksum, version or leakage check."""
    exit_code = EXIT_DATA_INTEGRITY_ERROR


class SaturatedCurveError(ValueError):
    """A Pd curve never brackets the requested detection probability."""


class StageError(SdlabError):
    """Wraps a failure inside a pipeline stage with the stage name and manifest state."""

    def __init__(self, stage: str, cause: BaseException, manifest_state: Optional[Dict[str, Any]] = None):
        super().__init__(f"Stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.manifest_state = manifest_state or {}
        self.exit_code = getattr(cause, 'exit_code', EXIT_FAILURE)
