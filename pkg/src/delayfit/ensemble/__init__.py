"""Monte Carlo ensembles of weight fits and their aggregate report."""

from delayfit.ensemble.report import (
    EnsembleReport,
    RunRecord,
    aggregate_weights,
    argmax_frequency,
    band_frame,
    error_table,
    summary_text,
    trajectory_band,
    verify_report,
    write_aggregates,
)
from delayfit.ensemble.runner import FitOptions, run_ensemble
from delayfit.ensemble.sampling import (
    MAX_REJECTIONS,
    ParamDistributions,
    ParameterDraw,
    draw_params,
    sample_params,
)

__all__ = [
    # Types
    "ParamDistributions",
    "ParameterDraw",
    "FitOptions",
    "RunRecord",
    "EnsembleReport",
    # Operations
    "draw_params",
    "sample_params",
    "run_ensemble",
    "aggregate_weights",
    "argmax_frequency",
    "error_table",
    "trajectory_band",
    "band_frame",
    "verify_report",
    "write_aggregates",
    "summary_text",
    "MAX_REJECTIONS",
]
