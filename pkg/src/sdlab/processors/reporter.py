# -*- coding: utf-8 -*-
"""Writes evaluation artifacts: curve CSVs, Pd-vs-SNR SVG charts, summaries and the run manifest."""

import os
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402
from pydantic import TypeAdapter  # noqa: E402

from sdlab.models.run_results import DetectorKind, EvalCurve, RunManifest  # noqa: E402
from sdlab.processors.evaluator import summarize, unified_vs_per_kind  # noqa: E402
from sdlab.utils.file_utils import atomic_output, write_text_atomic  # noqa: E402

CURVE_COLUMNS = ['detector', 'signal_kind', 'snr_db', 'pd', 'ci_lo', 'ci_hi', 'n_trials', 'pfa_achieved']

_CURVES_ADAPTER = TypeAdapter(List[EvalCurve])

_DETECTOR_STYLE = {
    DetectorKind.ENERGY: {'color': 'tab:blue', 'marker': 'o'},
    DetectorKind.FISHER_FFT: {'color': 'tab:orange', 'marker': 's'},
    DetectorKind.MATCHED_FILTER: {'color': 'tab:green', 'marker': '^'},
    DetectorKind.LEARNED: {'color': 'tab:red', 'marker': 'D'},
}
_KIND_LINESTYLE = {'sine': '-', 'qpsk': '--', 'ofdm': ':', 'unified': '-'}
_DETECTOR_TITLE = {
    DetectorKind.ENERGY: 'Energy',
    DetectorKind.FISHER_FFT: 'Fisher (FFT)',
    DetectorKind.MATCHED_FILTER: 'Matched filter',
    DetectorKind.LEARNED: 'Learned',
}


# =================================================================================
#  Tables
# =================================================================================

def curves_frame(curves: Sequence[EvalCurve]) -> pd.DataFrame:
    rows = []
    for curve in curves:
        for b in curve.bins:
            rows.append({
                'detector': curve.detector.value,
                'signal_kind': curve.signal_kind,
                'snr_db': b.snr_db,
                'pd': b.pd,
                'ci_lo': b.ci_lo,
                'ci_hi': b.ci_hi,
                'n_trials': b.n_trials,
                'pfa_achieved': curve.calibration.achieved_pfa,
            })
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)


def write_csv(frame: pd.DataFrame, path: str) -> str:
    with atomic_output(path) as partial_path:
        frame.to_csv(partial_path, index=False, lineterminator='\n')
    return path


def read_curves_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(path)


# =================================================================================
#  JSON artifacts
# =================================================================================

def save_curves(curves: Sequence[EvalCurve], path: str) -> str:
    write_text_atomic(path, _CURVES_ADAPTER.dump_json(list(curves), indent=4).decode('utf-8'))
    return path


def load_curves(path: str) -> List[EvalCurve]:
    with open(path, 'r', encoding='utf-8') as f:
        return _CURVES_ADAPTER.validate_json(f.read())


def save_manifest(manifest: RunManifest, path: str) -> str:
    write_text_atomic(path, manifest.model_dump_json(indent=4))
    return path


# =================================================================================
#  Charts
# =================================================================================

def chart_curves(curves: Sequence[EvalCurve]) -> List[EvalCurve]:
    """
    Curves drawn on a chart. With a kind-pooled energy curve present (unified
    experiments) the energy detector is drawn once from it; every other
    curve is drawn per kind.
    """
    pooled_energy = any(c.detector == DetectorKind.ENERGY and c.signal_kind == 'unified' for c in curves)
    drawn = []
    for curve in curves:
        if pooled_energy and curve.detector == DetectorKind.ENERGY and curve.signal_kind != 'unified':
            continue
        drawn.append(curve)
    return drawn


def _legend_label(curve: EvalCurve, multi_kind: bool) -> str:
    title = _DETECTOR_TITLE[curve.detector]
    if multi_kind and curve.signal_kind != 'unified':
        return f"{title}:{curve.signal_kind}"
    return title


def write_chart(curves: Sequence[EvalCurve], path: str, title: str) -> str:
    """One Pd-vs-SNR chart with every drawn curve and its 95% band, saved as deterministic SVG."""
    drawn = chart_curves(curves)
    multi_kind = len({c.signal_kind for c in drawn if c.signal_kind != 'unified'}) > 1

    with plt.rc_context({'svg.hashsalt': 'sdlab', 'svg.fonttype': 'none'}):
        fig, ax = plt.subplots(figsize=(8, 5))
        try:
            for curve in drawn:
                style = _DETECTOR_STYLE[curve.detector]
                snr = curve.snr_values
                ax.plot(snr, curve.pd_values, label=_legend_label(curve, multi_kind), color=style['color'],
                        marker=style['marker'], markersize=3, linestyle=_KIND_LINESTYLE.get(curve.signal_kind, '-'))
                ax.fill_between(snr, [b.ci_lo for b in curve.bins], [b.ci_hi for b in curve.bins],
                                color=style['color'], alpha=0.15, linewidth=0)
            target = drawn[0].calibration.target_pfa if drawn else None
            ax.set_xlabel('SNR (dB)')
            ax.set_ylabel('Probability of detection')
            ax.set_ylim(-0.02, 1.02)
            ax.set_title(title if target is None else f"{title} (P_FA = {target:g})")
            ax.grid(True, alpha=0.3)
            ax.legend(loc='lower right', fontsize='small')
            with atomic_output(path) as partial_path:
                fig.savefig(partial_path, format='svg', metadata={'Date': None}, bbox_inches='tight')
        finally:
            plt.close(fig)
    return path


# =================================================================================
#  Entry point
# =================================================================================

def report(curves: Sequence[EvalCurve], out_dir: str, manifest: RunManifest, logger) -> Dict[str, str]:
    """
    Writes <experiment>_curves.csv, <experiment>_pd_vs_snr.svg,
    <experiment>_summary.csv and <experiment>_manifest.json. Returns the paths by role.
    """
    if not curves:
        raise ValueError("report() needs at least one curve.")
    experiment = curves[0].experiment
    os.makedirs(out_dir, exist_ok=True)

    paths = {
        'curves_csv': os.path.join(out_dir, f"{experiment}_curves.csv"),
        'chart_svg': os.path.join(out_dir, f"{experiment}_pd_vs_snr.svg"),
        'summary_csv': os.path.join(out_dir, f"{experiment}_summary.csv"),
        'manifest_json': os.path.join(out_dir, f"{experiment}_manifest.json"),
    }
    write_csv(curves_frame(curves), paths['curves_csv'])
    write_chart(curves, paths['chart_svg'], f"{experiment}: Pd vs SNR")
    write_csv(pd.DataFrame(summarize(curves)), paths['summary_csv'])
    save_manifest(manifest, paths['manifest_json'])

    for role, path in paths.items():
        logger.info(f"Wrote {role}: {path}")
    return paths


def report_comparison(curves: Sequence[EvalCurve], out_dir: str, logger) -> Optional[str]:
    """unified_vs_per_kind.csv when both a unified and per-kind learned model were evaluated."""
    rows = unified_vs_per_kind(curves)
    if not rows:
        return None
    path = write_csv(pd.DataFrame(rows), os.path.join(out_dir, 'unified_vs_per_kind.csv'))
    logger.info(f"Wrote unified-vs-per-kind comparison: {path}")
    return path
