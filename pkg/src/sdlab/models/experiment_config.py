from __future__ import annotations

import os
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from sdlab.models.run_results import ALL_DETECTORS, DetectorKind
from sdlab.models.signal_params import DatasetKind, DatasetSpec, SimulationParams
from sdlab.utils import constants as C
from sdlab.utils.config_loader import get_config_value
from sdlab.utils.exceptions import ConfigError

# ===================================================================
#  Section blocks
# ===================================================================

class LearnedSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    num_features: int = Field(C.DEFAULT_NUM_FEATURES, ge=C.NUM_KERNELS)
    ridge_alpha_min: float = Field(1e-3, gt=0)
    ridge_alpha_max: float = Field(1e3, gt=0)
    ridge_alpha_count: int = Field(13, ge=1)
    cv_folds: int = Field(5, ge=2)
    bias_fit_examples: Optional[int] = Field(2000, ge=1)

    @model_validator(mode='after')
    def _grid_ordered(self) -> 'LearnedSettings':
        if self.ridge_alpha_min > self.ridge_alpha_max:
            raise ValueError("ridge_alpha_min must not exceed ridge_alpha_max.")
        return self

    @property
    def alphas(self) -> np.ndarray:
        return np.logspace(np.log10(self.ridge_alpha_min), np.log10(self.ridge_alpha_max), self.ridge_alpha_count)


class LabPaths(BaseModel):
    model_config = ConfigDict(frozen=True)

    datasets_folder: str
    models_folder: str
    results_folder: str
    stage_state_path: str


# ===================================================================
#  Experiment block
# ===================================================================

class ExperimentConfig(BaseModel):
    """One experiment: a signal kind (or the unified mix), a detector roster and its budgets."""
    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1)
    signal: DatasetKind
    detectors: Tuple[DetectorKind, ...] = ALL_DETECTORS
    master_seed: int = Field(0, ge=0, lt=2**64)
    per_bin_train: int = Field(200, ge=1)
    per_bin_eval: int = Field(500, ge=1)
    snr_min: int = C.SNR_RANGE_DB[0]
    snr_max: int = C.SNR_RANGE_DB[1]
    target_pfa: float = Field(C.DEFAULT_TARGET_PFA, gt=0, lt=1)
    tolerance: float = Field(C.DEFAULT_PFA_TOLERANCE, gt=0)
    calibration_trials: int = Field(C.DEFAULT_CALIBRATION_TRIALS, ge=1)
    verify_trials: int = Field(C.DEFAULT_VERIFY_TRIALS, ge=1)
    pfa_band: Tuple[float, float] = (0.007, 0.013)

    @field_validator('detectors', mode='before')
    @classmethod
    def _split_detector_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            value = [part.strip() for part in value.split(',') if part.strip()]
        if not value:
            raise ValueError("The detector roster must name at least one detector.")
        return value

    @field_validator('name')
    @classmethod
    def _filename_safe(cls, value: str) -> str:
        if os.sep in value or (os.altsep and os.altsep in value):
            raise ValueError(f"Experiment name '{value}' must not contain path separators.")
        return value

    @model_validator(mode='after')
    def _grid_nonempty(self) -> 'ExperimentConfig':
        if self.snr_min > self.snr_max:
            raise ValueError(f"snr_min {self.snr_min} exceeds snr_max {self.snr_max}.")
        return self

    @property
    def snr_grid(self) -> Tuple[int, ...]:
        return tuple(range(self.snr_min, self.snr_max + 1))

    @property
    def kinds(self) -> List[str]:
        return list(C.SIGNAL_KINDS) if self.signal == 'unified' else [self.signal]

    @property
    def validation_seed(self) -> int:
        return (self.master_seed + 1) % 2**64

    def uses(self, detector: DetectorKind) -> bool:
        return detector in self.detectors

    def train_spec(self, sim: SimulationParams) -> DatasetSpec:
        return DatasetSpec(kind=self.signal, snr_grid=self.snr_grid, per_bin=self.per_bin_train,
                           master_seed=self.master_seed, split='train', simulation=sim)

    def validation_spec(self, sim: SimulationParams) -> DatasetSpec:
        return DatasetSpec(kind=self.signal, snr_grid=self.snr_grid, per_bin=self.per_bin_eval,
                           master_seed=self.validation_seed, split='validation', simulation=sim)


# ===================================================================
#  Whole-lab configuration
# ===================================================================

class LabConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    simulation: SimulationParams
    learned: LearnedSettings
    paths: LabPaths
    workers: int = Field(4, ge=1)
    chunk_size: int = Field(2048, ge=1)
    experiments: List[ExperimentConfig]

    @model_validator(mode='after')
    def _unique_names(self) -> 'LabConfig':
        names = [exp.name for exp in self.experiments]
        if len(set(names)) != len(names):
            raise ValueError(f"Experiment names must be unique, got {names}.")
        return self

    def experiment(self, name: str) -> ExperimentConfig:
        for exp in self.experiments:
            if exp.name == name:
                return exp
        raise ConfigError(f"No experiment named '{name}' in the config.")


_EXPERIMENT_DEFAULT_KEYS = ('master_seed', 'per_bin_train', 'per_bin_eval', 'snr_min', 'snr_max', 'detectors')
_CALIBRATION_KEYS = ('target_pfa', 'tolerance', 'calibration_trials', 'verify_trials', 'pfa_band')


def _experiment_block(block: Dict[str, Any], config: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged: Dict[str, Any] = {}
    defaults = config.get('processing_defaults', {}) or {}
    for key in _EXPERIMENT_DEFAULT_KEYS:
        if key in defaults:
            merged[key] = defaults[key]
    calibration = config.get('calibration', {}) or {}
    for key in _CALIBRATION_KEYS:
        if key in calibration:
            merged[key] = calibration[key]
    merged.update(block)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged


def build_lab_config(config: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> LabConfig:
    """
    Validates the loaded config tree into a LabConfig. `overrides` carries
    CLI values (master_seed, per_bin, target_pfa, detectors, signal,
    out_dir); a given signal replaces the experiment list with a single
    experiment of that kind, and out_dir relocates every artifact folder.
    Raises ConfigError on any invalid value.
    """
    overrides = dict(overrides or {})
    per_bin = overrides.pop('per_bin', None)
    if per_bin is not None:
        overrides['per_bin_train'] = per_bin
        overrides['per_bin_eval'] = per_bin
    signal = overrides.pop('signal', None)
    out_dir = overrides.pop('out_dir', None)

    blocks = config.get('experiments') or []
    if signal is not None:
        matching = [b for b in blocks if b.get('signal') == signal]
        blocks = matching[:1] or [{'name': signal, 'signal': signal}]
    if not blocks:
        raise ConfigError("The config defines no experiments.")

    paths = config.get('project_paths', {}) or {}
    if out_dir:
        paths = {
            'datasets_folder': os.path.join(out_dir, 'datasets'),
            'models_folder': os.path.join(out_dir, 'models'),
            'results_folder': os.path.join(out_dir, 'results'),
            'stage_state_path': os.path.join(out_dir, 'stage_state.json'),
        }
    try:
        return LabConfig(
            simulation=SimulationParams(**(config.get('simulation') or {})),
            learned=LearnedSettings(**(config.get('learned') or {})),
            paths=LabPaths(
                datasets_folder=paths.get('datasets_folder', 'data/datasets'),
                models_folder=paths.get('models_folder', 'data/models'),
                results_folder=paths.get('results_folder', 'data/results'),
                stage_state_path=paths.get('stage_state_path', 'data/stage_state.json'),
            ),
            workers=get_config_value(config, 'processing_defaults.workers', 4),
            chunk_size=get_config_value(config, 'calibration.chunk_size', 2048),
            experiments=[ExperimentConfig(**_experiment_block(b, config, overrides)) for b in blocks],
        )
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}")
    except TypeError as e:
        raise ConfigError(f"Malformed configuration block: {e}")
