# -*- coding: utf-8 -*-
"""
Experiment pipeline: gen -> train -> calibrate -> eval -> report.

Each stage records its input fingerprint and output hashes in the stage
state file; a rerun whose fingerprint and outputs are unchanged skips the
stage. Any stage failure is re-raised as StageError carrying the stage name
and the manifest built so far.
"""

import json
import os
import time
from typing import Any, Callable, Dict, List, Optional

import sdlab
from sdlab.detectors.learned import KernelFeatureDetector
from sdlab.generators import dataset_generator
from sdlab.models.experiment_config import ExperimentConfig, LabConfig
from sdlab.models.run_results import CalibrationSet, DetectorKind, EvalCurve, RunManifest, StageRecord
from sdlab.processors import calibrator, evaluator, reporter
from sdlab.utils import dataset_io, model_io
from sdlab.utils import stage_state_handler as state_handler
from sdlab.utils.constants import DATASET_SUFFIX, MODEL_SUFFIX
from sdlab.utils.exceptions import SdlabError, StageError
from sdlab.utils.file_utils import sha256_file, sha256_text, write_text_atomic

STAGES = ('gen', 'train', 'calibrate', 'eval', 'report')


def _fingerprint(*parts: Any) -> str:
    return sha256_text(json.dumps(parts, sort_keys=True, default=str))


def _hash_or_none(path: str) -> Optional[str]:
    return sha256_file(path) if os.path.exists(path) else None


class ExperimentRunner:
    """Runs the stages of one experiment against a shared stage state file."""

    def __init__(self, lab: LabConfig, experiment: ExperimentConfig, logger):
        self.lab = lab
        self.exp = experiment
        self.logger = logger
        self.state = state_handler.load_state(lab.paths.stage_state_path, logger)
        self.manifest = RunManifest(
            experiment=experiment.name,
            tool_version=sdlab.__version__,
            master_seed=experiment.master_seed,
            config_hash=_fingerprint(experiment.model_dump(mode='json'), lab.simulation.model_dump(mode='json'),
                                     lab.learned.model_dump(mode='json')),
            signal_kinds=experiment.kinds,
            detectors=list(experiment.detectors),
        )

    # ------------------------------------------------------------------
    #  Paths
    # ------------------------------------------------------------------

    @property
    def train_path(self) -> str:
        return os.path.join(self.lab.paths.datasets_folder, f"{self.exp.name}_train{DATASET_SUFFIX}")

    @property
    def validation_path(self) -> str:
        return os.path.join(self.lab.paths.datasets_folder, f"{self.exp.name}_validation{DATASET_SUFFIX}")

    @property
    def model_path(self) -> str:
        return os.path.join(self.lab.paths.models_folder, f"{self.exp.name}{MODEL_SUFFIX}")

    @property
    def calibration_path(self) -> str:
        return os.path.join(self.lab.paths.results_folder, f"{self.exp.name}_calibration.json")

    @property
    def curves_path(self) -> str:
        return os.path.join(self.lab.paths.results_folder, f"{self.exp.name}_curves.json")

    @property
    def uses_learned(self) -> bool:
        return self.exp.uses(DetectorKind.LEARNED)

    # ------------------------------------------------------------------
    #  Stage bookkeeping
    # ------------------------------------------------------------------

    def _run_stage(self, stage: str, fingerprint: str, body: Callable[[], List[str]]) -> StageRecord:
        key = f"{self.exp.name}:{stage}"
        self.logger.info(f"[{self.exp.name}] Stage '{stage}' starting.")
        if state_handler.stage_is_current(self.state, key, fingerprint):
            outputs = list(self.state[key]['outputs'])
            self.logger.info(f"[{self.exp.name}] Stage '{stage}' is up to date; skipping.")
            record = StageRecord(name=stage, status='skipped', input_fingerprint=fingerprint, outputs=outputs)
        else:
            started = time.perf_counter()
            try:
                outputs = body()
            except Exception as e:
                raise StageError(stage, e, self.manifest.model_dump(mode='json'))
            elapsed = time.perf_counter() - started
            state_handler.record_stage(self.state, key, fingerprint, outputs)['wall_clock_s'] = elapsed
            state_handler.save_state(self.state, self.lab.paths.stage_state_path, self.logger)
            self.logger.info(f"[{self.exp.name}] Stage '{stage}' completed in {elapsed:.1f}s.")
            record = StageRecord(name=stage, status='completed', wall_clock_s=elapsed,
                                 input_fingerprint=fingerprint, outputs=outputs)
        self.manifest.stages = [s for s in self.manifest.stages if s.name != stage] + [record]
        return record

    def _require(self, path: str, stage: str) -> None:
        if not os.path.exists(path):
            raise StageError(stage, SdlabError(f"{path} does not exist; run the earlier stages first."),
                             self.manifest.model_dump(mode='json'))

    def _collect_provenance(self) -> None:
        """Fills manifest fields from artifacts and stage records of earlier invocations."""
        self.manifest.dataset_hashes = {
            'train': _hash_or_none(self.train_path),
            'validation': _hash_or_none(self.validation_path),
        }
        if self.uses_learned:
            self.manifest.model_hashes = {self.exp.name: _hash_or_none(self.model_path)}
        if os.path.exists(self.calibration_path):
            self.manifest.calibrations = self.load_calibration().calibrations
        seen = {s.name for s in self.manifest.stages}
        for stage in STAGES:
            entry = self.state.get(f"{self.exp.name}:{stage}")
            if stage in seen or not entry or stage == 'report':
                continue
            self.manifest.stages.append(StageRecord(
                name=stage, status='recorded', wall_clock_s=entry.get('wall_clock_s', 0.0),
                input_fingerprint=entry.get('input_fingerprint'), outputs=list(entry.get('outputs', {})),
            ))
        order = {name: i for i, name in enumerate(STAGES)}
        self.manifest.stages.sort(key=lambda s: order[s.name])

    def _remove_stale(self, paths: List[str]) -> None:
        for path in paths:
            if os.path.exists(path):
                self.logger.warning(f"Removing stale artifact {path} before regeneration.")
                os.remove(path)

    # ------------------------------------------------------------------
    #  Stages
    # ------------------------------------------------------------------

    def gen(self) -> StageRecord:
        sim = self.lab.simulation
        train_spec = self.exp.train_spec(sim)
        validation_spec = self.exp.validation_spec(sim)
        fingerprint = _fingerprint(sdlab.__version__, train_spec.spec_hash().hex(), validation_spec.spec_hash().hex())

        def body() -> List[str]:
            outputs = []
            for spec, path in ((train_spec, self.train_path), (validation_spec, self.validation_path)):
                self._remove_stale([path, dataset_io.manifest_path_for(path)])
                dataset_generator.generate(spec, path, self.logger, workers=self.lab.workers)
                outputs += [path, dataset_io.manifest_path_for(path)]
            dataset_generator.check_seed_disjoint(self.train_path, self.validation_path)
            return outputs

        record = self._run_stage('gen', fingerprint, body)
        self.manifest.dataset_hashes = {
            'train': _hash_or_none(self.train_path),
            'validation': _hash_or_none(self.validation_path),
        }
        return record

    def train(self) -> Optional[StageRecord]:
        if not self.uses_learned:
            self.logger.info(f"[{self.exp.name}] No learned detector in the roster; nothing to train.")
            return None
        self._require(self.train_path, 'train')
        settings = self.lab.learned
        fingerprint = _fingerprint(sha256_file(self.train_path), settings.model_dump(mode='json'), self.exp.master_seed)

        def body() -> List[str]:
            arrays = dataset_io.load_arrays(self.train_path, fields=('iq_norm',))
            self.logger.info(
                f"Training learned detector on {len(arrays['label'])} records "
                f"({settings.num_features} features, {settings.ridge_alpha_count} ridge values)."
            )
            detector = KernelFeatureDetector(
                num_features=settings.num_features, seed=self.exp.master_seed, alphas=settings.alphas,
                cv_folds=settings.cv_folds, bias_fit_examples=settings.bias_fit_examples,
                workers=self.lab.workers,
            ).fit(arrays['iq_norm'], arrays['label'])
            layout = detector.bank_.feature_spec()
            self.logger.info(
                f"Selected ridge alpha {detector.model_.alpha:g}; {layout.num_features} features over "
                f"{len(layout.features_per_dilation)} dilations, biases per dilation {list(layout.features_per_dilation)}."
            )
            model_io.save_model(self.model_path, detector.bank_, detector.model_, self.logger)
            return [self.model_path]

        record = self._run_stage('train', fingerprint, body)
        self.manifest.model_hashes = {self.exp.name: _hash_or_none(self.model_path)}
        return record

    def _learned_artifacts(self):
        if not self.uses_learned:
            return None
        self._require(self.model_path, 'calibrate')
        return model_io.load_model(self.model_path)

    def calibrate(self) -> StageRecord:
        exp = self.exp
        fingerprint = _fingerprint(
            exp.model_dump(mode='json'), self.lab.simulation.model_dump(mode='json'),
            _hash_or_none(self.model_path) if self.uses_learned else None,
        )

        def body() -> List[str]:
            artifacts = self._learned_artifacts()
            common = dict(
                kinds=exp.kinds, dataset_kind=exp.signal, snr_grid=exp.snr_grid, master_seed=exp.master_seed,
                sim=self.lab.simulation, logger=self.logger, learned_artifacts=artifacts,
                chunk_size=self.lab.chunk_size, workers=self.lab.workers,
            )
            results = calibrator.calibrate_detectors(
                list(exp.detectors), target_pfa=exp.target_pfa, tolerance=exp.tolerance,
                n_trials=exp.calibration_trials, **common,
            )
            checks = calibrator.verify_detectors(results, n_trials=exp.verify_trials, band=exp.pfa_band, **common)
            calibration_set = CalibrationSet(experiment=exp.name, calibrations=list(results.values()), pfa_checks=checks)
            write_text_atomic(self.calibration_path, calibration_set.model_dump_json(indent=4))
            return [self.calibration_path]

        record = self._run_stage('calibrate', fingerprint, body)
        self.manifest.calibrations = self.load_calibration().calibrations
        return record

    def load_calibration(self) -> CalibrationSet:
        with open(self.calibration_path, 'r', encoding='utf-8') as f:
            return CalibrationSet.model_validate_json(f.read())

    def evaluate(self) -> StageRecord:
        self._require(self.validation_path, 'eval')
        self._require(self.calibration_path, 'eval')
        fingerprint = _fingerprint(
            sha256_file(self.validation_path), sha256_file(self.calibration_path),
            _hash_or_none(self.model_path) if self.uses_learned else None,
        )

        def body() -> List[str]:
            calibration_set = self.load_calibration()
            curves = evaluator.evaluate(
                self.validation_path, calibration_set.by_detector(), self.exp.name, self.logger,
                learned_artifacts=self._learned_artifacts(),
                train_path=self.train_path if os.path.exists(self.train_path) else None,
                trained_on=self.exp.signal, pfa_checks=calibration_set.pfa_checks,
                chunk_size=self.lab.chunk_size, workers=self.lab.workers,
            )
            reporter.save_curves(curves, self.curves_path)
            return [self.curves_path]

        return self._run_stage('eval', fingerprint, body)

    def load_curves(self) -> List[EvalCurve]:
        return reporter.load_curves(self.curves_path)

    def report(self) -> StageRecord:
        self._require(self.curves_path, 'report')
        self._collect_provenance()
        fingerprint = _fingerprint(sha256_file(self.curves_path), self.manifest.dataset_hashes,
                                   self.manifest.model_hashes, self.manifest.config_hash)

        def body() -> List[str]:
            paths = reporter.report(self.load_curves(), self.lab.paths.results_folder, self.manifest, self.logger)
            return list(paths.values())

        return self._run_stage('report', fingerprint, body)

    def run(self) -> RunManifest:
        """Runs every stage in order; unchanged stages are skipped."""
        self.gen()
        self.train()
        self.calibrate()
        self.evaluate()
        self.report()
        timings = ', '.join(f"{name} {seconds:.1f}s" for name, seconds in self.manifest.stage_wall_clock().items())
        self.logger.info(f"[{self.exp.name}] Run finished ({timings}).")
        return self.manifest

    def run_stage(self, stage: str):
        if stage not in STAGES:
            raise SdlabError(f"Unknown stage '{stage}'.")
        return {'gen': self.gen, 'train': self.train, 'calibrate': self.calibrate,
                'eval': self.evaluate, 'report': self.report}[stage]()


def run_experiment(lab: LabConfig, experiment: ExperimentConfig, logger) -> RunManifest:
    return ExperimentRunner(lab, experiment, logger).run()


def run_all(lab: LabConfig, logger) -> Dict[str, RunManifest]:
    """Runs every configured experiment, then the cross-experiment unified-vs-per-kind comparison."""
    manifests: Dict[str, RunManifest] = {}
    curves: List[EvalCurve] = []
    for experiment in lab.experiments:
        runner = ExperimentRunner(lab, experiment, logger)
        manifests[experiment.name] = runner.run()
        curves.extend(runner.load_curves())
    reporter.report_comparison(curves, lab.paths.results_folder, logger)
    return manifests
