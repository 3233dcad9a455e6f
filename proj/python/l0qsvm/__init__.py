"""Sparse kernel-free quadratic surface SVM."""

from ._l0qsvm import (
    ConvergenceError,
    L0QSVMError,
    OvRModel,
    PDResult,
    QuadraticSurfaceModel,
    StationarityReport,
    accuracy,
    cross_validate,
    duplication_matrix,
    elimination_matrix,
    hard_threshold,
    hvec,
    lift,
    load_csv,
    make_ellipse,
    penalty_decompose,
    top_k_support,
    train_binary,
    train_ovr,
    unhvec,
)

__all__ = [
    "ConvergenceError",
    "L0QSVMError",
    "OvRModel",
    "PDResult",
    "QuadraticSurfaceModel",
    "StationarityReport",
    "accuracy",
    "cross_validate",
    "duplication_matrix",
    "elimination_matrix",
    "hard_threshold",
    "hvec",
    "lift",
    "load_csv",
    "make_ellipse",
    "penalty_decompose",
    "top_k_support",
    "train_binary",
    "train_ovr",
    "unhvec",
]
