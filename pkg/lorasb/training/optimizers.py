from ..core.defaults import (
    DEFAULT_ADAMW_BETA1, DEFAULT_ADAMW_BETA2, DEFAULT_ADAMW_EPS, DEFAULT_ADAMW_WEIGHT_DECAY
)
from ..core.errors import RejectedInputError, RunAbortedError

from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat
from typing import List, Literal, Tuple
import numpy as np
import math

LRSchedule = Literal["constant", "linear"]


class AdamWConfig(BaseModel):
    beta1 :float = Field(default=DEFAULT_ADAMW_BETA1, ge=0.0, lt=1.0)
    beta2 :float = Field(default=DEFAULT_ADAMW_BETA2, ge=0.0, lt=1.0)
    eps :PositiveFloat = DEFAULT_ADAMW_EPS
    weight_decay :NonNegativeFloat = DEFAULT_ADAMW_WEIGHT_DECAY


class AdamWState(BaseModel):
    """First and second moment buffers, one per trainable parameter, plus the step counter."""
    m :List[np.ndarray]
    v :List[np.ndarray]
    t :int = 0

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @classmethod
    def zeros_like(cls, params :List[np.ndarray])->"AdamWState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def _check_conformable(params :List[np.ndarray], grads :List[np.ndarray]):
    if len(params) != len(grads):
        raise RejectedInputError(f"{len(params)} parameters but {len(grads)} gradients")
    for index, (p, g) in enumerate(zip(params, grads)):
        if np.shape(p) != np.shape(g):
            raise RejectedInputError(f"parameter {index}: shape {np.shape(p)} but gradient {np.shape(g)}")

def sgd_step(params :List[np.ndarray], grads :List[np.ndarray], eta :float)->List[np.ndarray]:
    """``p <- p - eta·g`` for every parameter; returns new arrays."""
    _check_conformable(params, grads)
    return [p - eta * g for p, g in zip(params, grads)]

def adamw_step(
    params :List[np.ndarray],
    grads :List[np.ndarray],
    state :AdamWState,
    config :AdamWConfig,
    eta :float,
    t :int)->Tuple[List[np.ndarray], AdamWState]:
    """
    One decoupled-weight-decay Adam step at step index ``t`` (1-based):

        m <- β1·m + (1-β1)·g
        v <- β2·v + (1-β2)·g²
        p <- p - eta·m̂/(sqrt(v̂)+eps) - eta·λ·p
    """
    _check_conformable(params, grads)
    if t < 1:
        raise RejectedInputError(f"adamw_step: step index must be >= 1, got {t}")
    if len(state.m) != len(params) or any(np.shape(m) != np.shape(p) for m, p in zip(state.m, params)):
        raise RejectedInputError("adamw_step: moment buffers do not match the parameters")

    bad = [index for index, g in enumerate(grads) if not np.isfinite(g).all()]
    if bad:
        raise RunAbortedError(
            f"adamw_step: non-finite gradient for parameter(s) {bad} at step {t}",
            step=t,
            diagnostics={"parameters": bad}
        )

    beta1, beta2 = config.beta1, config.beta2
    correction1 = 1.0 - beta1 ** t
    correction2 = 1.0 - beta2 ** t

    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        new_params.append(p - eta * m_hat / (np.sqrt(v_hat) + config.eps) - eta * config.weight_decay * p)
        new_m.append(m)
        new_v.append(v)

    return new_params, AdamWState(m=new_m, v=new_v, t=t)

def scheduled_eta(eta :float, step :int, total_steps :int, schedule :LRSchedule="constant", warmup_ratio :float=0.0)->float:
    """
    Learning rate for 1-based ``step``.

    ``linear`` ramps up over ``ceil(warmup_ratio·total_steps)`` steps, then decays
    linearly towards 0 at the end of the run.
    """
    if schedule == "constant":
        return eta
    if schedule != "linear":
        raise RejectedInputError(f"unknown learning-rate schedule {schedule!r}")

    warmup = math.ceil(warmup_ratio * total_steps)
    k = step - 1
    if k < warmup:
        return eta * (k + 1) / warmup
    return eta * (total_steps - k) / max(1, total_steps - warmup)
