"""Logistic generalized additive model with penalized cubic B-spline smooths."""

from .design import DesignMatrix, GamSpec, SmoothBasis, build_design, load_spec, parse_spec
from .fit import GamFit, binomial_deviance, fit_gam, pirls, predict_choice, predict_prob
from .summary import (
    AicRow,
    PartialEffect,
    Summary,
    compare_aic,
    pairwise_delta,
    partial_effects,
    partial_svg,
    read_summary_csv,
    summarize,
    summary_rows,
    write_partial_csv,
    write_summary_csv,
)

__all__ = [
    "AicRow", "DesignMatrix", "GamFit", "GamSpec", "PartialEffect", "SmoothBasis", "Summary",
    "binomial_deviance", "build_design", "compare_aic", "fit_gam", "load_spec", "pairwise_delta",
    "parse_spec", "partial_effects", "partial_svg", "pirls", "predict_choice", "predict_prob",
    "read_summary_csv", "summarize", "summary_rows", "write_partial_csv", "write_summary_csv",
]
