"""
Brute-force reference computations.

Nothing here calls the kernel SVD: spectral quantities come from a symmetric
eigensolve of the Gram matrix, least squares from the Kronecker-vectorized
normal equations, and gradients from central differences.
"""
from ..adapters.algebra import AdapterState, effective_weight
from ..core.defaults import (
    DEFAULT_FD_STEP, FD_MAX_STEP, FD_MIN_STEP, INVERSE_CONDITION_GUARD, ORACLE_MAX_DIM, ORACLE_MAX_RANK
)
from ..core.errors import RejectedInputError, SingularityError
from ..kernel.matrix import Matrix, as_matrix
from ..nn.model import Batch, ModelStack, loss_value

from pydantic import BaseModel, computed_field
from typing import Any, List, Optional, Tuple
import numpy as np

Coordinates = Optional[List[Tuple[int, int]]]


class OracleResult(BaseModel):
    """One oracle comparison; ``passed`` iff ``deviation <= tolerance``."""
    name :str
    reference :Any = None
    measured :Any = None
    deviation :float
    tolerance :float
    detail :Optional[str] = None

    @computed_field
    @property
    def passed(self)->bool:
        return bool(self.deviation <= self.tolerance)


def _check_oracle_size(m :int, n :int, r :int):
    if max(m, n) > ORACLE_MAX_DIM or r > ORACLE_MAX_RANK:
        raise RejectedInputError(
            f"oracle instances are capped at m, n <= {ORACLE_MAX_DIM} and r <= {ORACLE_MAX_RANK}; got ({m}, {n}), r={r}"
        )

def naive_matmul(a :Matrix, b :Matrix)->Matrix:
    a = as_matrix(a, "naive_matmul lhs")
    b = as_matrix(b, "naive_matmul rhs")
    if a.shape[1] != b.shape[0]:
        raise RejectedInputError(f"naive_matmul: cannot multiply {a.shape} by {b.shape}")

    rows, inner = a.shape
    cols = b.shape[1]
    out = np.zeros((rows, cols))
    for i in range(rows):
        for j in range(cols):
            total = 0.0
            for k in range(inner):
                total += a[i, k] * b[k, j]
            out[i, j] = total
    return out

def lstsq_oracle(b :Matrix, a :Matrix, g :Matrix, s :float)->Matrix:
    """
    argmin_X ‖s·B·X·A − g‖_F from the normal equations of the vectorized problem
    ``vec(s·B·X·A) = s·(Aᵀ ⊗ B)·vec(X)`` (column-major vec).
    """
    b = as_matrix(b, "B")
    a = as_matrix(a, "A")
    g = as_matrix(g, "g")
    m, r = b.shape
    n = a.shape[1]
    if a.shape[0] != r or g.shape != (m, n):
        raise RejectedInputError(f"lstsq_oracle: shapes B{b.shape}, A{a.shape}, g{g.shape} do not conform")
    _check_oracle_size(m, n, r)

    design = s * np.kron(a.T, b)
    normal = design.T @ design
    cond = np.linalg.cond(normal)
    if not cond <= INVERSE_CONDITION_GUARD:
        raise SingularityError(f"lstsq_oracle: normal equations are singular (cond={cond:.3e})", condition_number=float(cond))

    solution = np.linalg.solve(normal, design.T @ g.reshape(-1, order="F"))
    return solution.reshape((r, r), order="F")

def _gram_eigh(m :Matrix)->Tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of mᵀm, largest first."""
    values, vectors = np.linalg.eigh(m.T @ m)
    return values[::-1], vectors[:, ::-1]

def singular_values_oracle(m :Matrix)->np.ndarray:
    m = as_matrix(m, "singular_values_oracle input")
    gram = m.T @ m if m.shape[0] >= m.shape[1] else m @ m.T
    values = np.linalg.eigvalsh(gram)[::-1]
    return np.sqrt(np.maximum(values, 0.0))

def best_rank_r_oracle(m :Matrix, r :int)->Matrix:
    """``Σ_{i<=r} σᵢuᵢvᵢᵀ`` as ``m·V_r·V_rᵀ`` with V from the eigenvectors of the smaller Gram matrix."""
    m = as_matrix(m, "best_rank_r_oracle input")
    if not 1 <= r <= min(m.shape):
        raise RejectedInputError(f"best_rank_r_oracle: rank {r} outside [1, {min(m.shape)}]")

    if m.shape[0] >= m.shape[1]:
        _, vectors = _gram_eigh(m)
        top = vectors[:, :r]
        return m @ top @ top.T

    _, vectors = _gram_eigh(m.T)
    top = vectors[:, :r]
    return top @ top.T @ m

def _central_difference(loss_at, value :float, h :float)->float:
    return (loss_at(value + h) - loss_at(value - h)) / (2.0 * h)

def _check_step(h :float):
    if not FD_MIN_STEP <= h <= FD_MAX_STEP:
        raise RejectedInputError(f"finite-difference step {h} outside [{FD_MIN_STEP}, {FD_MAX_STEP}]")

def fd_gradient_oracle(
    model :ModelStack,
    batch :Batch,
    layer :int,
    h :float=DEFAULT_FD_STEP,
    coordinates :Coordinates=None)->Matrix:
    """
    Central-difference ∂L/∂W for ``model.weights[layer]``.

    Only ``coordinates`` are evaluated when given (the rest of the result is 0);
    ``model`` is not modified.
    """
    _check_step(h)
    probe = model.clone()
    weight = probe.weights[layer].copy()
    coordinates = coordinates if coordinates is not None else list(np.ndindex(*weight.shape))

    def loss_at(i :int, j :int):
        def evaluate(value :float)->float:
            perturbed = weight.copy()
            perturbed[i, j] = value
            probe.set_weight(layer, perturbed)
            return loss_value(probe, batch)
        return evaluate

    grad = np.zeros_like(weight)
    for i, j in coordinates:
        grad[i, j] = _central_difference(loss_at(i, j), weight[i, j], h)
    return grad

def fd_r_gradient_oracle(
    model :ModelStack,
    batch :Batch,
    states :List[AdapterState],
    module :int,
    h :float=DEFAULT_FD_STEP,
    coordinates :Coordinates=None)->Matrix:
    """Central-difference ∂L/∂R for the core of ``states[module]`` through the full forward pass."""
    _check_step(h)
    st = states[module]
    if st.r_mat is None:
        raise RejectedInputError(f"module {module} ({st.method.value}) has no core matrix")

    probe = model.clone()
    for index, other in enumerate(states):
        probe.set_weight(index, effective_weight(other))

    core = st.r_mat.copy()
    coordinates = coordinates if coordinates is not None else list(np.ndindex(*core.shape))

    def loss_at(i :int, j :int):
        def evaluate(value :float)->float:
            perturbed = core.copy()
            perturbed[i, j] = value
            probe.set_weight(module, effective_weight(st.model_copy(update={"r_mat": perturbed})))
            return loss_value(probe, batch)
        return evaluate

    grad = np.zeros_like(core)
    for i, j in coordinates:
        grad[i, j] = _central_difference(loss_at(i, j), core[i, j], h)
    return grad

def vector_relative_error(measured :np.ndarray, reference :np.ndarray)->float:
    """``‖measured − reference‖ / max(‖measured‖, ‖reference‖)``; 0 when both vanish."""
    measured = np.asarray(measured, dtype=np.float64).ravel()
    reference = np.asarray(reference, dtype=np.float64).ravel()
    scale = max(np.linalg.norm(measured), np.linalg.norm(reference))
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(measured - reference) / scale)
