"""Behavioural-artifact classification: synthesis, feature extraction, training and evaluation."""

from ._core import (
    ALGORITHMS,
    Dataset,
    Error,
    Model,
    error_report,
    evaluate,
    extract,
    feature_names,
    flip_experiment,
    format_errors,
    load_model,
    read_matrix,
    render_table,
    run_experiment,
    synthesize,
    train,
)

__all__ = [
    "ALGORITHMS",
    "Dataset",
    "Error",
    "Model",
    "error_report",
    "evaluate",
    "extract",
    "feature_names",
    "flip_experiment",
    "format_errors",
    "load_model",
    "read_matrix",
    "render_table",
    "run_experiment",
    "synthesize",
    "train",
]
