# -*- coding: utf-8 -*-
"""Master orchestrator for the Signal Detection Lab (sdlab)."""

import argparse
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

from sdlab.models.run_results import DetectorKind
from sdlab.utils.config_loader import load_config
from sdlab.utils.constants import EXIT_FAILURE, EXIT_OK
from sdlab.utils.exceptions import ConfigError, SdlabError
from sdlab.utils.sdlab_logger import get_sdlab_logger

SIGNAL_CHOICES = ['sine', 'qpsk', 'ofdm', 'unified']


def exit_code(error: BaseException) -> int:
    """Maps a failure to the CLI exit code of its error category."""
    return getattr(error, 'exit_code', EXIT_FAILURE)


def _detector_list(value: str) -> str:
    names = [part.strip() for part in value.split(',') if part.strip()]
    valid = {d.value for d in DetectorKind}
    unknown = [n for n in names if n not in valid]
    if not names or unknown:
        raise argparse.ArgumentTypeError(
            f"expected a comma list of {sorted(valid)}, got '{value}'"
        )
    return ','.join(names)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='Path to the YAML config (default: config/config.yaml, then config/sampleconfig.yaml).')
    common.add_argument('--seed', type=int, help='Master seed; overrides every experiment in the config.')
    common.add_argument('--out', help='Root folder for datasets, models, results and the stage state file.')
    common.add_argument('--signal', choices=SIGNAL_CHOICES, help='Run a single experiment for this signal kind.')
    common.add_argument('--per-bin', type=int, dest='per_bin', help='Sequences per SNR bin for both the training and validation datasets.')
    common.add_argument('--pfa', type=float, help='Target false-alarm probability.')
    common.add_argument('--detectors', type=_detector_list, help='Comma list of detectors, e.g. energy,fisher,mf,learned.')

    parser = argparse.ArgumentParser(description="Signal Detection Lab (sdlab) CLI", formatter_class=argparse.RawTextHelpFormatter)
    subparsers = parser.add_subparsers(dest='command', required=True, help='Available commands')
    subparsers.add_parser('gen', parents=[common], help='Generate the training and validation datasets')
    subparsers.add_parser('train', parents=[common], help='Train the learned detector on the training dataset')
    subparsers.add_parser('calibrate', parents=[common], help='Set CFAR thresholds on noise-only populations')
    subparsers.add_parser('eval', parents=[common], help='Compute Pd-vs-SNR curves on the validation dataset')
    subparsers.add_parser('report', parents=[common], help='Write curve tables, charts, summaries and manifests')
    subparsers.add_parser('run', parents=[common], help='Run every stage of every experiment')
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        'master_seed': args.seed,
        'per_bin': args.per_bin,
        'target_pfa': args.pfa,
        'detectors': args.detectors,
        'signal': args.signal,
        'out_dir': os.path.abspath(args.out) if args.out else None,
    }


def execute(args: argparse.Namespace, config: Dict[str, Any], logger) -> None:
    # Heavy numeric imports stay out of --help and argument errors.
    from sdlab.models.experiment_config import build_lab_config
    from sdlab.processors import reporter
    from sdlab.processors.experiment_runner import ExperimentRunner, run_all

    lab = build_lab_config(config, overrides_from_args(args))
    logger.info(f"Experiments: {[exp.name for exp in lab.experiments]}; artifacts under {lab.paths.results_folder}")

    if args.command == 'run':
        run_all(lab, logger)
        return

    curves: List = []
    for experiment in lab.experiments:
        runner = ExperimentRunner(lab, experiment, logger)
        runner.run_stage(args.command)
        if args.command == 'report':
            curves.extend(runner.load_curves())
    if curves:
        reporter.report_comparison(curves, lab.paths.results_folder, logger)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the sdlab application. Returns the process exit code."""
    args = build_parser().parse_args(argv)

    try:
        config = load_config(args.config)
    except ConfigError as e:
        print(f"FATAL: Configuration could not be loaded: {e}")
        return exit_code(e)

    logger = get_sdlab_logger('run_sdlab', config)
    logger.info("sdlab starting.")
    logger.info(f"Executing command: {args.command} with arguments: {vars(args)}")

    try:
        execute(args, config, logger)
    except SdlabError as e:
        logger.error(f"FATAL: {e}")
        return exit_code(e)
    except Exception as e:
        logger.error(f"FATAL: unexpected {type(e).__name__}: {e}")
        return EXIT_FAILURE

    logger.info("sdlab finished.")
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
