from ..core.defaults import DEFAULT_SUBSPACE_TOL, FULL_RANK_RATIO_GUARD
from ..core.errors import RejectedInputError, SingularityError
from ..kernel.matrix import Matrix, as_matrix, inverse_small

from pydantic import BaseModel, ConfigDict, PositiveFloat, PositiveInt, computed_field, model_validator
from decimal import Decimal, ROUND_HALF_UP
from typing import Dict, List, Literal, Optional, Tuple
from enum import Enum
import numpy as np


class AdapterMethod(str, Enum):
    FULL_FT = "full_ft"
    LORA = "lora"
    LORA_XS = "lora_xs"
    LORA_SB = "lora_sb"

    @property
    def uses_core(self)->bool:
        """True for the frozen-B/A methods whose only trainable factor is the r x r core."""
        return self in (AdapterMethod.LORA_XS, AdapterMethod.LORA_SB)


FactorName = Literal["b", "r_mat", "a", "delta"]

_TRAINABLE = {
    AdapterMethod.FULL_FT: ("delta",),
    AdapterMethod.LORA: ("b", "a"),
    AdapterMethod.LORA_XS: ("r_mat",),
    AdapterMethod.LORA_SB: ("r_mat",)
}


class AdapterFactors(BaseModel):
    """
    Output of an initializer for one weight matrix.

    ``base`` replaces W0 as the frozen weight the update is added to; only the
    residual-base (PiSSA-style) initialization sets it.
    """
    b :Matrix
    a :Matrix
    r_mat :Optional[Matrix] = None
    s :PositiveFloat = 1.0
    base :Optional[Matrix] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def rank(self)->int:
        return int(self.b.shape[1])


class AdapterState(BaseModel):
    """One adapted weight matrix: frozen W0 plus the method-specific factors."""
    method :AdapterMethod
    w0 :Matrix
    b :Optional[Matrix] = None
    r_mat :Optional[Matrix] = None
    a :Optional[Matrix] = None
    delta :Optional[Matrix] = None
    s :PositiveFloat = 1.0
    rank :PositiveInt

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_factors(self)->"AdapterState":
        m, n = self.w0.shape
        r = self.rank
        if r > min(m, n):
            raise ValueError(f"rank {r} exceeds min({m}, {n})")

        if self.method == AdapterMethod.FULL_FT:
            if self.delta is None or self.delta.shape != (m, n):
                raise ValueError(f"full_ft needs a dense ({m}, {n}) delta")
            if any(factor is not None for factor in (self.b, self.r_mat, self.a)):
                raise ValueError("full_ft carries no low-rank factors")
            return self

        if self.delta is not None:
            raise ValueError(f"{self.method.value} carries no dense delta")
        if self.b is None or self.b.shape != (m, r):
            raise ValueError(f"{self.method.value} needs b of shape ({m}, {r})")
        if self.a is None or self.a.shape != (r, n):
            raise ValueError(f"{self.method.value} needs a of shape ({r}, {n})")

        if self.method == AdapterMethod.LORA:
            if self.r_mat is not None:
                raise ValueError("lora carries no core matrix")
        elif self.r_mat is None or self.r_mat.shape != (r, r):
            raise ValueError(f"{self.method.value} needs r_mat of shape ({r}, {r})")
        return self

    @computed_field
    @property
    def trainable(self)->Dict[str, bool]:
        names = _TRAINABLE[self.method]
        return {name: name in names for name in ("b", "r_mat", "a", "delta")}

    @property
    def trainable_names(self)->Tuple[FactorName, ...]:
        return _TRAINABLE[self.method]

    @property
    def frozen_names(self)->Tuple[FactorName, ...]:
        return tuple(
            name for name in ("b", "r_mat", "a")
            if getattr(self, name) is not None and name not in _TRAINABLE[self.method]
        )

    @property
    def shape(self)->Tuple[int, int]:
        return tuple(self.w0.shape)

    @classmethod
    def from_factors(cls, method :AdapterMethod, w0 :Matrix, factors :AdapterFactors)->"AdapterState":
        base = factors.base if factors.base is not None else w0
        return cls(
            method=method,
            w0=np.array(base, dtype=np.float64),
            b=factors.b,
            r_mat=None if method == AdapterMethod.LORA else factors.r_mat,
            a=factors.a,
            s=factors.s,
            rank=factors.rank
        )

    @classmethod
    def full_ft(cls, w0 :Matrix)->"AdapterState":
        w0 = as_matrix(w0, "w0")
        return cls(method=AdapterMethod.FULL_FT, w0=w0, delta=np.zeros_like(w0), rank=min(w0.shape))

    def with_scale(self, s :float)->"AdapterState":
        return self.model_copy(update={"s": s})

    def copy_state(self)->"AdapterState":
        return self.model_copy(deep=True)


def _require(st :AdapterState, *names :FactorName):
    missing = [name for name in names if getattr(st, name) is None]
    if missing:
        raise RejectedInputError(f"{st.method.value} state is missing {', '.join(missing)}")

def effective_update(st :AdapterState)->Matrix:
    """The method's update on top of W0: ΔW, sBA, or sBRA."""
    if st.method == AdapterMethod.FULL_FT:
        _require(st, "delta")
        return st.delta.copy()
    if st.method == AdapterMethod.LORA:
        _require(st, "b", "a")
        return st.s * (st.b @ st.a)
    _require(st, "b", "r_mat", "a")
    return st.s * (st.b @ st.r_mat @ st.a)

def effective_weight(st :AdapterState)->Matrix:
    return st.w0 + effective_update(st)

def param_count(method :AdapterMethod, module_shapes :List[Tuple[int, int]], rank :int)->int:
    """Trainable parameters across ``module_shapes`` at adapter rank ``rank``."""
    method = AdapterMethod(method)
    if not module_shapes:
        raise RejectedInputError("param_count: no module shapes given")
    if rank < 1:
        raise RejectedInputError(f"param_count: rank must be positive, got {rank}")

    for m, n in module_shapes:
        if m < 1 or n < 1:
            raise RejectedInputError(f"param_count: invalid module shape ({m}, {n})")
        if method != AdapterMethod.FULL_FT and rank > min(m, n):
            raise RejectedInputError(f"param_count: rank {rank} exceeds min({m}, {n})")

    if method == AdapterMethod.FULL_FT:
        return sum(m * n for m, n in module_shapes)
    if method == AdapterMethod.LORA:
        return sum(rank * (m + n) for m, n in module_shapes)
    return len(module_shapes) * rank * rank

def format_param_count(count :int, unit :Literal["M", "K"]="M")->str:
    """Two decimals, half-up: 229376 -> '0.23 M', 2162688 with unit K -> '2162.69 K'."""
    divisor = {"M": Decimal(1_000_000), "K": Decimal(1_000)}.get(unit)
    if divisor is None:
        raise RejectedInputError(f"format_param_count: unit must be M or K, got {unit!r}")
    value = (Decimal(count) / divisor).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return f"{value} {unit}"

def require_full_rank(factor :Matrix, name :str)->None:
    """Rejects factors whose smallest singular value is below the full-rank guard."""
    sigma = np.linalg.svd(as_matrix(factor, name), compute_uv=False)
    largest = float(sigma[0])
    smallest = float(sigma[-1])
    if largest == 0.0 or smallest <= FULL_RANK_RATIO_GUARD * largest:
        raise SingularityError(
            f"{name} is rank deficient: sigma_min={smallest:.3e}, sigma_max={largest:.3e}",
            condition_number=float("inf") if smallest == 0.0 else largest / smallest
        )

def projectors(st :AdapterState)->Tuple[Matrix, Matrix]:
    """``P_B = B (BᵀB)⁻¹ Bᵀ`` onto Col(B) and ``P_A = Aᵀ (AAᵀ)⁻¹ A`` onto Row(A)."""
    _require(st, "b", "a")
    require_full_rank(st.b, "B")
    require_full_rank(st.a.T, "Aᵀ")
    p_b = st.b @ inverse_small(st.b.T @ st.b) @ st.b.T
    p_a = st.a.T @ inverse_small(st.a @ st.a.T) @ st.a
    return p_b, p_a

def subspace_membership(st :AdapterState, m :Matrix, tol :float=DEFAULT_SUBSPACE_TOL)->bool:
    """True iff ``m`` lies in Col(B) x Row(A): ‖P_B m P_A − m‖_F ≤ tol·max(1, ‖m‖_F)."""
    m = as_matrix(m, "subspace_membership input")
    if m.shape != st.shape:
        raise RejectedInputError(f"subspace_membership: matrix {m.shape} does not match state {st.shape}")
    p_b, p_a = projectors(st)
    residual = np.linalg.norm(p_b @ m @ p_a - m)
    return bool(residual <= tol * max(1.0, float(np.linalg.norm(m))))

def orthonormality_residuals(st :AdapterState)->Tuple[Optional[float], Optional[float]]:
    """``(‖BᵀB − I‖_F, ‖AAᵀ − I‖_F)``; ``(None, None)`` for full_ft."""
    if st.b is None or st.a is None:
        return None, None
    eye = np.eye(st.rank)
    return (
        float(np.linalg.norm(st.b.T @ st.b - eye)),
        float(np.linalg.norm(st.a @ st.a.T - eye))
    )
