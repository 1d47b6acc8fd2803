from ..adapters.algebra import AdapterFactors, AdapterMethod, AdapterState, effective_weight
from ..core.defaults import ADAPTER_STREAM_TAG, DEGENERATE_SIGMA_RATIO
from ..core.errors import RejectedInputError
from ..core.logs import logger
from ..kernel.matrix import Matrix, as_matrix, truncated_svd
from ..nn.model import Batch, ModelStack
from .estimate import estimate_update
from .recipes import InitKind, InitRecipe, UpdateEstimate

from typing import List, Optional, Tuple
import numpy as np

def _svd_factors(source :Matrix, r :int, s :float, label :str)->Tuple[AdapterFactors, np.ndarray]:
    """``B = U_r, A = V_rᵀ, R = S_r/s``; returns the factors and the top-r singular values."""
    top = truncated_svd(source, r)
    sigma = top.s.copy()
    degenerate = sigma < DEGENERATE_SIGMA_RATIO * sigma[0] if sigma[0] > 0 else np.ones_like(sigma, dtype=bool)
    if degenerate.any():
        logger.warning(
            f"{label}: only {int((~degenerate).sum())} of {r} singular values are nonzero; "
            f"zeroing R for the remaining directions"
        )
        sigma[degenerate] = 0.0

    factors = AdapterFactors(b=top.u, a=top.vt, r_mat=np.diag(sigma) / s, s=s)
    return factors, sigma

def adapter_rng(seed :int, index :int)->np.random.Generator:
    """Random stream for module ``index``; never coincides with ``default_rng(seed)`` used by tasks and models."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(ADAPTER_STREAM_TAG, index)))

def init_lora_sb(delta_w :Matrix, r :int, s :float=1.0)->AdapterFactors:
    """
    Truncated SVD of ΔW_avg: ``B = U_r``, ``A = V_rᵀ``, ``R = S_r / s``.

    ``s·B·R·A`` is then the best rank-r Frobenius approximation of ΔW_avg and
    B, A are orthonormal.
    """
    if s <= 0:
        raise RejectedInputError(f"init_lora_sb: scale must be positive, got {s}")
    factors, _ = _svd_factors(as_matrix(delta_w, "delta_w"), r, s, "init_lora_sb")
    return factors

def init_lora(w0 :Matrix, r :int, s :float, rng :np.random.Generator)->AdapterFactors:
    """Standard LoRA: ``B = 0`` and ``A ~ U(±1/sqrt(n))`` so the model starts at W0."""
    m, n = as_matrix(w0, "w0").shape
    if not 1 <= r <= min(m, n):
        raise RejectedInputError(f"init_lora: rank {r} outside [1, {min(m, n)}]")
    bound = 1.0 / np.sqrt(n)
    return AdapterFactors(b=np.zeros((m, r)), a=rng.uniform(-bound, bound, size=(r, n)), s=s)

def init_ablation(
    recipe :InitRecipe,
    delta_w :Optional[Matrix]=None,
    w0 :Optional[Matrix]=None,
    s :float=1.0,
    rng :Optional[np.random.Generator]=None)->AdapterFactors:
    """Factors for every :class:`InitKind`; see the individual branches for the constructions."""
    kind = InitKind(recipe.kind)
    rng = rng if rng is not None else adapter_rng(recipe.seed, 0)
    r = recipe.rank

    if kind.needs_estimate and delta_w is None:
        raise RejectedInputError(f"{kind.value} initialization needs an update estimate")
    if kind == InitKind.PISSA_STYLE and w0 is None:
        raise RejectedInputError("pissa_style initialization needs the pre-trained weight")

    if kind == InitKind.LORA_SB:
        return init_lora_sb(delta_w, r, s)

    if kind == InitKind.NOISY_SB:
        source = as_matrix(delta_w, "delta_w")
        if recipe.sigma:
            source = source + recipe.sigma * rng.normal(size=source.shape)
        return init_lora_sb(source, r, s)

    if kind == InitKind.KAIMING_SVD:
        m, n = (delta_w if delta_w is not None else w0).shape
        factors, _ = _svd_factors(rng.normal(0.0, np.sqrt(2.0 / m), size=(m, n)), r, s, "kaiming_svd")
        return factors

    if kind == InitKind.PISSA_STYLE:
        w0 = as_matrix(w0, "w0")
        factors, sigma = _svd_factors(w0, r, s, "pissa_style")
        principal = (factors.b * sigma) @ factors.a
        return factors.model_copy(update={"base": w0 - principal})

    if kind == InitKind.NONORTHO_SB:
        factors, sigma = _svd_factors(as_matrix(delta_w, "delta_w"), r, s, "nonortho_sb")
        return AdapterFactors(b=factors.b * sigma, a=factors.a, r_mat=np.eye(r) / s, s=s)

    # zero_b: A and R from the lora_sb construction, B annihilated
    source = delta_w if delta_w is not None else w0
    if source is None:
        raise RejectedInputError("zero_b initialization needs an update estimate or the pre-trained weight")
    factors = init_lora_sb(source, r, s)
    return factors.model_copy(update={"b": np.zeros_like(factors.b)})

def default_scale(method :AdapterMethod, rank :int, alpha :Optional[float]=None)->float:
    """lora_sb uses s = 1; every other method uses s = alpha / r with alpha defaulting to r."""
    if AdapterMethod(method) == AdapterMethod.LORA_SB and alpha is None:
        return 1.0
    return float(alpha if alpha is not None else rank) / rank

def build_adapters(
    model :ModelStack,
    method :AdapterMethod,
    recipe :InitRecipe,
    estimate :Optional[UpdateEstimate]=None,
    s :Optional[float]=None)->List[AdapterState]:
    """One AdapterState per weight matrix of ``model`` (biases are never adapted)."""
    method = AdapterMethod(method)
    if estimate is not None and len(estimate.deltas) != len(model.weights):
        raise RejectedInputError(f"estimate covers {len(estimate.deltas)} modules, model has {len(model.weights)}")

    scale = s if s is not None else default_scale(method, recipe.rank)
    states = []
    for index, w0 in enumerate(model.weights):
        rng = adapter_rng(recipe.seed, index)
        if method == AdapterMethod.FULL_FT:
            states.append(AdapterState.full_ft(w0))
        elif method == AdapterMethod.LORA:
            states.append(AdapterState.from_factors(method, w0, init_lora(w0, recipe.rank, scale, rng)))
        else:
            factors = init_ablation(
                recipe,
                delta_w=estimate.deltas[index] if estimate is not None else None,
                w0=w0,
                s=scale,
                rng=rng
            )
            states.append(AdapterState.from_factors(method, w0, factors))

    logger.debug(f"built {len(states)} {method.value} adapter(s) with {InitKind(recipe.kind).value} init, rank={recipe.rank}, s={scale}")
    return states

def apply_adapters(model :ModelStack, states :List[AdapterState]):
    """Writes every state's effective weight into ``model``."""
    if len(states) != len(model.weights):
        raise RejectedInputError(f"{len(states)} adapter states for {len(model.weights)} weight matrices")
    for index, st in enumerate(states):
        model.set_weight(index, effective_weight(st))

def init_sb(
    model :ModelStack,
    data :List[Batch],
    recipe :InitRecipe,
    s :float=1.0)->Tuple[List[AdapterState], UpdateEstimate]:
    """
    End-to-end LoRA-SB initialization: estimate ΔW_avg at W0, factor it, and
    install the adapted weights into ``model``.
    """
    estimate = estimate_update(model, data, recipe)
    states = build_adapters(model, AdapterMethod.LORA_SB, recipe.model_copy(update={"kind": InitKind.LORA_SB}), estimate, s=s)
    apply_adapters(model, states)
    return states, estimate
