from lorasb.kernel.matrix import (
    Matrix, SvdResult, as_matrix, condition_number, frob_inner, frob_norm,
    inverse_small, matmul, relative_error, sign_matrix, svd, truncated_svd
)
from lorasb.kernel.io import load_matrix, matrix_from_csv, matrix_to_csv, save_matrix

__all__ = [
    "Matrix",
    "SvdResult",
    "as_matrix",
    "condition_number",
    "frob_inner",
    "frob_norm",
    "inverse_small",
    "matmul",
    "relative_error",
    "sign_matrix",
    "svd",
    "truncated_svd",
    "load_matrix",
    "matrix_from_csv",
    "matrix_to_csv",
    "save_matrix"
]
