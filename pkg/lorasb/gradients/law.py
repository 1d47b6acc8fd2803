from ..adapters.algebra import AdapterState, projectors, require_full_rank
from ..core.errors import RejectedInputError
from ..kernel.matrix import Matrix, as_matrix, frob_inner, inverse_small

from pydantic import BaseModel, ConfigDict, Field, computed_field
from typing import List, Optional, Tuple
from itertools import combinations
from enum import Enum
import numpy as np


class GradientPathway(str, Enum):
    RAW_XS = "raw_xs"
    CORRECTED = "corrected"


class GradientBundle(BaseModel):
    g_full :Optional[Matrix] = None
    g_r_xs :Matrix
    g_r_opt :Matrix
    g_tilde :Matrix

    model_config = ConfigDict(arbitrary_types_allowed=True)


def _core_factors(st :AdapterState)->Tuple[Matrix, Matrix]:
    if st.b is None or st.a is None:
        raise RejectedInputError(f"{st.method.value} state has no B/A factors")
    return st.b, st.a

def xs_gradient(st :AdapterState, g_full :Matrix)->Matrix:
    """Chain-rule gradient w.r.t. the core: ``s·Bᵀ·g·Aᵀ`` (r x r)."""
    b, a = _core_factors(st)
    g_full = as_matrix(g_full, "g_full")
    if g_full.shape != st.shape:
        raise RejectedInputError(f"xs_gradient: gradient {g_full.shape} does not match weight {st.shape}")
    return st.s * (b.T @ g_full @ a.T)

def layer_core_gradient(st :AdapterState, dz :np.ndarray, h_in :np.ndarray)->Matrix:
    """
    ``∂L/∂R`` chained through the layer itself: ``s·(dz·B)ᵀ·(h_in·Aᵀ)``, where ``dz``
    is the pre-activation delta and ``h_in`` the layer input. The m x n weight
    gradient is never formed.
    """
    b, a = _core_factors(st)
    if dz.shape[1] != st.shape[0] or h_in.shape[1] != st.shape[1]:
        raise RejectedInputError(f"layer_core_gradient: delta {dz.shape} and input {h_in.shape} do not match weight {st.shape}")
    return st.s * ((dz @ b).T @ (h_in @ a.T))

def chain_rule_gap(st :AdapterState, g_full :Matrix, g_r_xs :Matrix, dz :np.ndarray, h_in :np.ndarray)->float:
    """
    ``‖g_r_xs − layer_core_gradient(st, dz, h_in)‖`` over ``s·‖B‖·‖g_full‖·‖A‖``, the
    Frobenius bound on both terms. Zero when the weight gradient vanishes.
    """
    b, a = _core_factors(st)
    bound = st.s * float(np.linalg.norm(b) * np.linalg.norm(g_full) * np.linalg.norm(a))
    if bound == 0.0:
        return 0.0
    return float(np.linalg.norm(as_matrix(g_r_xs, "g_r_xs") - layer_core_gradient(st, dz, h_in))) / bound

def optimal_correction(st :AdapterState, g_r_xs :Matrix)->Matrix:
    """
    Minimizer of ‖s·B·X·A − g‖_F computed from the raw core gradient alone:

        X = (1/s²) (BᵀB)⁻¹ g_r_xs (AAᵀ)⁻¹

    Raises SingularityError when B or A fails the full-rank guard.
    """
    b, a = _core_factors(st)
    g_r_xs = as_matrix(g_r_xs, "g_r_xs")
    if g_r_xs.shape != (st.rank, st.rank):
        raise RejectedInputError(f"optimal_correction: expected ({st.rank}, {st.rank}), got {g_r_xs.shape}")

    require_full_rank(b, "B")
    require_full_rank(a.T, "Aᵀ")
    return inverse_small(b.T @ b) @ g_r_xs @ inverse_small(a @ a.T) / (st.s * st.s)

def equivalent_gradient(st :AdapterState, g_r :Matrix)->Matrix:
    """Virtual m x n gradient ``s·B·g_r·A`` that a core update induces on W."""
    b, a = _core_factors(st)
    g_r = as_matrix(g_r, "g_r")
    if g_r.shape != (st.rank, st.rank):
        raise RejectedInputError(f"equivalent_gradient: expected ({st.rank}, {st.rank}), got {g_r.shape}")
    return st.s * (b @ g_r @ a)

def predicted_loss_decrement(g_r_xs :Matrix, g_r_opt :Matrix, eta :float)->float:
    """First-order loss change ``-eta·⟨g_r_xs, g_r_opt⟩`` of the step ``R <- R - eta·g_r_opt``."""
    if eta < 0 or not np.isfinite(eta):
        raise RejectedInputError(f"predicted_loss_decrement: eta must be finite and >= 0, got {eta}")
    if eta == 0:
        return 0.0
    return -eta * frob_inner(g_r_xs, g_r_opt)

def core_gradient(st :AdapterState, g_full :Matrix, pathway :GradientPathway)->Tuple[Matrix, Matrix]:
    """``(g_r_xs, applied)`` where ``applied`` is what the optimizer sees on ``pathway``."""
    g_r_xs = xs_gradient(st, g_full)
    if GradientPathway(pathway) == GradientPathway.RAW_XS:
        return g_r_xs, g_r_xs
    return g_r_xs, optimal_correction(st, g_r_xs)

def gradient_bundle(st :AdapterState, g_full :Matrix)->GradientBundle:
    g_r_xs, g_r_opt = core_gradient(st, g_full, GradientPathway.CORRECTED)
    return GradientBundle(
        g_full=g_full,
        g_r_xs=g_r_xs,
        g_r_opt=g_r_opt,
        g_tilde=equivalent_gradient(st, g_r_opt)
    )

def projector_form(st :AdapterState, g_full :Matrix)->Matrix:
    """``P_B·g·P_A``: the corrected equivalent gradient written without the core."""
    p_b, p_a = projectors(st)
    return p_b @ as_matrix(g_full, "g_full") @ p_a

def equivalent_update(st :AdapterState, g_full :Matrix, eta :float, pathway :GradientPathway=GradientPathway.CORRECTED)->Matrix:
    """Effective-weight change ``s·B·ΔR·A`` of one SGD step ``ΔR = -eta·applied``."""
    _, applied = core_gradient(st, g_full, pathway)
    return equivalent_gradient(st, -eta * applied)


class ScaleInvarianceReport(BaseModel):
    scales :List[float]
    corrected_norms :List[float]
    raw_norms :List[float]
    corrected_max_deviation :float
    raw_max_deviation :float
    raw_norm_ratios :List[float] = Field(description="‖g̃_raw(s)‖ / ‖g̃_raw(scales[0])‖")
    expected_raw_ratios :List[float] = Field(description="(s / scales[0])²")
    projector_deviation :float

    @computed_field
    @property
    def max_raw_ratio_error(self)->float:
        return max(
            (abs(ratio / expected - 1.0) for ratio, expected in zip(self.raw_norm_ratios, self.expected_raw_ratios)),
            default=0.0
        )


def _max_pairwise(matrices :List[Matrix])->float:
    return max(
        (float(np.linalg.norm(x - y)) for x, y in combinations(matrices, 2)),
        default=0.0
    )

def scale_invariance_report(st :AdapterState, g_full :Matrix, scales :List[float])->ScaleInvarianceReport:
    """
    Equivalent gradient for each scale along both pathways.

    The corrected pathway cancels s; the raw pathway grows as s².
    """
    if not scales:
        raise RejectedInputError("scale_invariance_report: no scales given")
    if any(not np.isfinite(s) or s <= 0 for s in scales):
        raise RejectedInputError(f"scale_invariance_report: scales must be positive, got {scales}")

    corrected, raw = [], []
    for s in scales:
        scaled = st.with_scale(float(s))
        g_r_xs, g_r_opt = core_gradient(scaled, g_full, GradientPathway.CORRECTED)
        corrected.append(equivalent_gradient(scaled, g_r_opt))
        raw.append(equivalent_gradient(scaled, g_r_xs))

    raw_norms = [float(np.linalg.norm(x)) for x in raw]
    reference = raw_norms[0]
    return ScaleInvarianceReport(
        scales=[float(s) for s in scales],
        corrected_norms=[float(np.linalg.norm(x)) for x in corrected],
        raw_norms=raw_norms,
        corrected_max_deviation=_max_pairwise(corrected),
        raw_max_deviation=_max_pairwise(raw),
        raw_norm_ratios=[norm / reference if reference else 0.0 for norm in raw_norms],
        expected_raw_ratios=[(s / scales[0]) ** 2 for s in scales],
        projector_deviation=max(float(np.linalg.norm(x - projector_form(st, g_full))) for x in corrected)
    )
