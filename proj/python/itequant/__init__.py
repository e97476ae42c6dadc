"""Randomization inference for quantiles of individual treatment effects."""

import json

from ._core import (
    AnalysisConfig,
    IoError,
    OutcomeTable,
    Profile,
    ValidationError,
    amplification_diagonal,
    amplify_gamma,
    hyper_pmf,
    hyper_tail,
    placebo_count_limit,
    placebo_lower_limit,
    placebo_pvalue,
    pvalue_quantile,
    pvalue_stratified,
    quantile_profile,
    read_csv,
    run_analysis_json,
    sensitivity_pvalue,
    ss_metric,
    stratified_profile,
    worst_case_statistic,
)

__all__ = [
    "AnalysisConfig",
    "IoError",
    "OutcomeTable",
    "Profile",
    "ValidationError",
    "amplification_diagonal",
    "amplify_gamma",
    "analyze",
    "hyper_pmf",
    "hyper_tail",
    "placebo_count_limit",
    "placebo_lower_limit",
    "placebo_pvalue",
    "pvalue_quantile",
    "pvalue_stratified",
    "quantile_profile",
    "read_csv",
    "sensitivity_pvalue",
    "ss_metric",
    "stratified_profile",
    "worst_case_statistic",
]


def analyze(command, input_path, **options):
    """Run a CLI command in-process and return the report as a dict.

    Keyword arguments set the AnalysisConfig fields of the same name.
    Non-informative limits (-inf) come back as None.
    """
    config = AnalysisConfig()
    config.command = command
    config.input_path = str(input_path)
    for key, value in options.items():
        if not hasattr(config, key):
            raise TypeError(f"unknown option {key!r}")
        setattr(config, key, value)
    return json.loads(run_analysis_json(config))
