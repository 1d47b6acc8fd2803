from ..core.defaults import (
    INVERSE_CONDITION_GUARD, INVERSE_MAX_DIM, SVD_SWEEPS_PER_DIM
)
from ..core.errors import NumericalFailureError, RejectedInputError, SingularityError

from pydantic import AfterValidator, BaseModel, ConfigDict, model_validator
from typing import Annotated, Any, Optional
import numpy as np

def as_matrix(data :Any, name :str="matrix")->np.ndarray:
    """
    Validates ``data`` as a Matrix: 2-D, positive dims, float64, all entries finite.

    Returns a C-contiguous float64 array (a copy only when conversion requires one).
    """
    try:
        arr = np.ascontiguousarray(data, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise RejectedInputError(f"{name}: cannot convert to a float64 matrix ({e})") from e

    if arr.ndim != 2:
        raise RejectedInputError(f"{name}: expected a 2-D matrix, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise RejectedInputError(f"{name}: dimensions must be positive, got {arr.shape}")
    if not np.isfinite(arr).all():
        raise RejectedInputError(f"{name}: contains NaN or Inf entries")
    return arr

Matrix = Annotated[np.ndarray, AfterValidator(lambda value: as_matrix(value))]
"""Dense 2-D float64 array; the carrier for weights, gradients and factors."""

def _finite(result :Matrix, op :str)->Matrix:
    if not np.isfinite(result).all():
        raise NumericalFailureError(f"{op} produced non-finite entries")
    return result


class SvdResult(BaseModel):
    """Thin SVD ``m = u @ diag(s) @ vt`` with k = len(s) singular triplets."""
    u :Matrix
    s :np.ndarray
    vt :Matrix

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def check_shapes(self)->"SvdResult":
        k = self.s.shape[0]
        if self.u.shape[1] != k or self.vt.shape[0] != k:
            raise RejectedInputError(
                f"inconsistent SVD factors: u{self.u.shape}, s({k},), vt{self.vt.shape}"
            )
        return self

    @property
    def rank(self)->int:
        return int(self.s.shape[0])

    def reconstruct(self)->Matrix:
        return (self.u * self.s) @ self.vt


def matmul(a :Matrix, b :Matrix)->Matrix:
    a = as_matrix(a, "matmul lhs")
    b = as_matrix(b, "matmul rhs")
    if a.shape[1] != b.shape[0]:
        raise RejectedInputError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _finite(a @ b, "matmul")

def _canonical_signs(u :Matrix, vt :Matrix)->None:
    # largest-|.| entry of every u column is made positive; argmax picks the lowest row on ties
    pivots = np.argmax(np.abs(u), axis=0)
    flips = u[pivots, np.arange(u.shape[1])] < 0
    u[:, flips] *= -1.0
    vt[flips, :] *= -1.0

def svd(m :Matrix)->SvdResult:
    """
    Thin SVD with k = min(rows, cols) and a deterministic sign convention.

    LAPACK's divide-and-conquer bidiagonalization does the work; the result is
    post-processed so that the largest-magnitude entry of each column of ``u``
    is positive (ties go to the lowest row index).
    """
    m = as_matrix(m, "svd input")
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise NumericalFailureError(
            f"svd did not converge for a {m.shape} matrix: {e}",
            iterations=SVD_SWEEPS_PER_DIM * min(m.shape)
        ) from e

    u = np.ascontiguousarray(u)
    vt = np.ascontiguousarray(vt)
    _canonical_signs(u, vt)
    return SvdResult(u=_finite(u, "svd"), s=np.maximum(s, 0.0), vt=_finite(vt, "svd"))

def truncated_svd(m :Matrix, r :int, full :Optional[SvdResult]=None)->SvdResult:
    """Top-``r`` singular triplets of ``m``; pass ``full`` to reuse an existing factorization."""
    m = as_matrix(m, "truncated_svd input")
    if not isinstance(r, (int, np.integer)) or not 1 <= r <= min(m.shape):
        raise RejectedInputError(f"truncated_svd: rank {r} outside [1, {min(m.shape)}] for {m.shape}")

    full = full if full is not None else svd(m)
    return SvdResult(
        u=np.ascontiguousarray(full.u[:, :r]),
        s=full.s[:r].copy(),
        vt=np.ascontiguousarray(full.vt[:r, :])
    )

def condition_number(m :Matrix)->float:
    s = np.linalg.svd(as_matrix(m, "condition_number input"), compute_uv=False)
    if s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])

def inverse_small(m :Matrix)->Matrix:
    """Inverse of a small square matrix (r x r Gram matrices), guarded against ill-conditioning."""
    m = as_matrix(m, "inverse_small input")
    rows, cols = m.shape
    if rows != cols:
        raise RejectedInputError(f"inverse_small: matrix must be square, got {m.shape}")
    if rows > INVERSE_MAX_DIM:
        raise RejectedInputError(f"inverse_small: dimension {rows} exceeds {INVERSE_MAX_DIM}")

    cond = condition_number(m)
    if not cond <= INVERSE_CONDITION_GUARD:
        raise SingularityError(
            f"inverse_small: condition number {cond:.3e} exceeds guard {INVERSE_CONDITION_GUARD:.0e}",
            condition_number=cond
        )
    return _finite(np.linalg.inv(m), "inverse_small")

def frob_inner(a :Matrix, b :Matrix)->float:
    a = as_matrix(a, "frob_inner lhs")
    b = as_matrix(b, "frob_inner rhs")
    if a.shape != b.shape:
        raise RejectedInputError(f"frob_inner: shapes differ {a.shape} vs {b.shape}")
    return float(np.vdot(a, b))

def frob_norm(a :Matrix)->float:
    return float(np.linalg.norm(as_matrix(a, "frob_norm input")))

def sign_matrix(m :Matrix)->Matrix:
    """Entrywise sign with sign(0) = 0."""
    return np.sign(as_matrix(m, "sign_matrix input"))

def relative_error(measured :Matrix, reference :Matrix)->float:
    """``||measured - reference||_F / max(1e-300, ||reference||_F)``."""
    measured = np.asarray(measured, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    return float(np.linalg.norm(measured - reference) / max(np.linalg.norm(reference), 1e-300))
