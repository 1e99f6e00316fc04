"""Regularizing the operator norm of heavy-tailed random matrices by zeroing a small submatrix."""

from .errors import (BandFailure, ContractViolation, DimensionMismatch, DimensionTooLarge, MatregError,
                     MatrixParseError)
from .io import load_matrix, save_matrix
from .matcore import IndexSet, NormReport, RemovalMask, norm_report, op_norm, zero_submatrix
from .reglab import Budgets, RegularizationReport, regularize_full, topk_truncate

__version__ = "0.1.0"

__all__ = [
    "BandFailure", "Budgets", "ContractViolation", "DimensionMismatch", "DimensionTooLarge", "IndexSet",
    "MatregError", "MatrixParseError", "NormReport", "RegularizationReport", "RemovalMask", "load_matrix",
    "norm_report", "op_norm", "regularize_full", "save_matrix", "topk_truncate", "zero_submatrix",
]
