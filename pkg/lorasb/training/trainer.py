from ..adapters.algebra import (
    AdapterMethod, AdapterState, effective_update, orthonormality_residuals, subspace_membership
)
from ..core.defaults import (
    CORE_GRAD_CHECK_TOL, DEFAULT_BUDGET_FRACTION, DEFAULT_LR_SCHEDULE, DEFAULT_SUBSPACE_TOL, DEFAULT_WARMUP_RATIO,
    DESCENT_TOL, PROBE_MAX_HALVINGS, PROBE_START_ETA, PROBE_WINDOW
)
from ..core.errors import InvariantViolationError, RejectedInputError, RunAbortedError, SingularityError
from ..core.logs import logger
from ..gradients.law import GradientPathway, chain_rule_gap, core_gradient, predicted_loss_decrement
from ..initializers.estimate import estimate_update
from ..initializers.factors import apply_adapters, build_adapters, default_scale
from ..initializers.recipes import InitKind, InitRecipe, UpdateEstimate, resolve_recipe
from ..kernel.matrix import frob_inner
from ..nn.model import Batch, ForwardCache, ModelStack, backward, evaluate, forward, layer_deltas, loss_value
from .optimizers import AdamWConfig, AdamWState, LRSchedule, adamw_step, scheduled_eta, sgd_step
from .report import RunReport, StepRecord

from pydantic import BaseModel, Field, PositiveFloat, PositiveInt, model_validator
from typing import Dict, Iterator, List, Literal, Optional, Tuple
import numpy as np
import time


class TrainConfig(BaseModel):
    method :AdapterMethod = AdapterMethod.LORA_SB
    recipe :InitRecipe = Field(default_factory=InitRecipe)
    optimizer :Literal["sgd", "adamw"] = "sgd"
    adamw :AdamWConfig = Field(default_factory=AdamWConfig)
    eta :PositiveFloat = 0.5
    steps :PositiveInt = 500
    batch_size :Optional[PositiveInt] = None
    gradient_pathway :GradientPathway = GradientPathway.CORRECTED
    seed :int = 0
    s :Optional[PositiveFloat] = None
    alpha :Optional[PositiveFloat] = None
    lr_schedule :LRSchedule = DEFAULT_LR_SCHEDULE
    warmup_ratio :float = Field(default=DEFAULT_WARMUP_RATIO, ge=0.0, lt=1.0)
    budget_fraction :float = Field(default=DEFAULT_BUDGET_FRACTION, gt=0.0, le=1.0)
    strict :bool = False
    subspace_tol :PositiveFloat = DEFAULT_SUBSPACE_TOL
    core_grad_tol :PositiveFloat = CORE_GRAD_CHECK_TOL
    check_every :PositiveInt = 1

    @model_validator(mode="after")
    def one_scale(self)->"TrainConfig":
        if self.s is not None and self.alpha is not None:
            raise ValueError("give either s or alpha, not both")
        return self

    @property
    def scale(self)->float:
        if self.s is not None:
            return self.s
        return default_scale(self.method, self.recipe.rank, self.alpha)


def batch_cycle(data :List[Batch], seed :int)->Iterator[Batch]:
    """Endless stream over ``data``; each epoch visits every batch once in a seeded order."""
    rng = np.random.default_rng(seed)
    while True:
        for index in rng.permutation(len(data)):
            yield data[index]

def rebatch(data :List[Batch], batch_size :Optional[int])->List[Batch]:
    if batch_size is None or all(batch.size == batch_size for batch in data):
        return data
    inputs = np.concatenate([batch.inputs for batch in data])
    targets = np.concatenate([batch.targets for batch in data])
    return [
        Batch(inputs=inputs[start:start + batch_size], targets=targets[start:start + batch_size])
        for start in range(0, inputs.shape[0], batch_size)
    ]


class AdapterRun:
    """
    Mutable training state of one run: the model, its adapter states and the
    optimizer buffers. ``step`` performs forward, backward, the per-pathway core
    gradient, the optimizer update and the invariant sampling for one batch.
    """

    def __init__(self, model :ModelStack, states :List[AdapterState], config :TrainConfig):
        if len(states) != len(model.weights):
            raise RejectedInputError(f"{len(states)} adapter states for {len(model.weights)} weight matrices")
        self.model = model
        self.states = states
        self.config = config
        self.pathway = GradientPathway(config.gradient_pathway)
        self.adam_state :Optional[AdamWState] = None
        self.frozen = [{name: getattr(st, name).copy() for name in st.frozen_names} for st in states]
        apply_adapters(model, states)

    def _params(self)->List[np.ndarray]:
        return [getattr(st, name) for st in self.states for name in st.trainable_names]

    def _set_params(self, values :List[np.ndarray]):
        values = iter(values)
        for st in self.states:
            for name in st.trainable_names:
                setattr(st, name, next(values))

    def _gradients(self, weight_grads :List[np.ndarray])->Tuple[List[np.ndarray], List[np.ndarray], Dict[int, np.ndarray]]:
        """
        Per trainable parameter: the true chain-rule gradient and the gradient the
        optimizer applies; plus ``s·Bᵀ·g·Aᵀ`` keyed by module for core-trained modules.
        """
        true_grads, applied, core_grads = [], [], {}
        for index, (st, g) in enumerate(zip(self.states, weight_grads)):
            if st.method == AdapterMethod.FULL_FT:
                true_grads.append(g)
                applied.append(g)
            elif st.method == AdapterMethod.LORA:
                pair = [st.s * (g @ st.a.T), st.s * (st.b.T @ g)]
                true_grads.extend(pair)
                applied.extend(pair)
            else:
                g_r_xs, g_r = core_gradient(st, g, self.pathway)
                true_grads.append(g_r_xs)
                applied.append(g_r)
                core_grads[index] = g_r_xs
        return true_grads, applied, core_grads

    def core_gradient_error(
        self,
        cache :ForwardCache,
        weight_grads :List[np.ndarray],
        core_grads :Dict[int, np.ndarray])->Optional[float]:
        """Worst :func:`chain_rule_gap` over core-trained modules; None when no module trains a core."""
        if not core_grads:
            return None
        deltas = layer_deltas(self.model, cache)
        return max(
            chain_rule_gap(self.states[index], weight_grads[index], g_r_xs, deltas[index], cache.activations[index])
            for index, g_r_xs in core_grads.items()
        )

    def frozen_intact(self)->bool:
        return all(
            np.array_equal(getattr(st, name), snapshot[name])
            for st, snapshot in zip(self.states, self.frozen)
            for name in snapshot
        )

    def invariants(self)->Tuple[Optional[bool], Optional[float], Optional[float]]:
        """Subspace-membership flag and worst orthonormality residuals across core-trained modules."""
        if not all(st.method.uses_core for st in self.states):
            return None, None, None

        flags = []
        b_residual = a_residual = 0.0
        for st in self.states:
            try:
                flags.append(subspace_membership(st, effective_update(st), self.config.subspace_tol))
            except SingularityError:
                flags.append(None)
            b_res, a_res = orthonormality_residuals(st)
            b_residual = max(b_residual, b_res)
            a_residual = max(a_residual, a_res)

        subspace_ok = None if any(flag is None for flag in flags) else all(flags)
        return subspace_ok, b_residual, a_residual

    def _abort(self, message :str, step :int, strict :bool, **diagnostics):
        logger.error(f"step {step}: {message}")
        error = InvariantViolationError if strict else RunAbortedError
        raise error(message, step=step, diagnostics=diagnostics)

    def step(self, step :int, batch :Batch)->StepRecord:
        config = self.config
        eta = scheduled_eta(config.eta, step, config.steps, config.lr_schedule, config.warmup_ratio)

        loss, cache = forward(self.model, batch)
        grads = backward(self.model, cache)
        if not all(np.isfinite(g).all() for g in grads.weights):
            self._abort("non-finite gradient", step, strict=False, loss=loss)

        true_grads, applied, core_grads = self._gradients(grads.weights)
        checked = step == 1 or step == config.steps or step % config.check_every == 0
        core_grad_error = self.core_gradient_error(cache, grads.weights, core_grads) if checked else None
        grad_norm = float(np.sqrt(sum(float(np.vdot(g, g)) for g in true_grads)))

        params = self._params()
        if config.optimizer == "sgd":
            new_params = sgd_step(params, applied, eta)
            dl_pred = sum(predicted_loss_decrement(g, a, eta) for g, a in zip(true_grads, applied))
        else:
            if self.adam_state is None:
                self.adam_state = AdamWState.zeros_like(params)
            new_params, self.adam_state = adamw_step(params, applied, self.adam_state, config.adamw, eta, step)
            dl_pred = sum(frob_inner(g, new - old) for g, new, old in zip(true_grads, new_params, params))

        if not all(np.isfinite(p).all() for p in new_params):
            self._abort("parameters diverged", step, strict=False, loss=loss, eta=eta)
        self._set_params(new_params)
        try:
            apply_adapters(self.model, self.states)
        except RejectedInputError as e:
            self._abort(f"effective weights diverged: {e}", step, strict=False, loss=loss, eta=eta)
        loss_after = loss_value(self.model, batch)
        if not np.isfinite(loss_after):
            self._abort("loss diverged", step, strict=False, loss=loss, eta=eta)

        subspace_ok = b_residual = a_residual = None
        if checked:
            subspace_ok, b_residual, a_residual = self.invariants()

        if config.strict:
            if core_grad_error is not None and core_grad_error > config.core_grad_tol:
                self._abort(
                    f"core gradient disagrees with the layer chain rule (relative error {core_grad_error:.3e})",
                    step, strict=True, core_grad_error=core_grad_error
                )
            if config.optimizer == "sgd" and dl_pred > DESCENT_TOL:
                self._abort(f"predicted loss change {dl_pred:.3e} is positive", step, strict=True, dl_pred=dl_pred)
            if subspace_ok is False:
                self._abort("update left the span of the frozen factors", step, strict=True)
            if not self.frozen_intact():
                self._abort("a frozen factor changed", step, strict=True)

        record = StepRecord(
            step=step,
            loss=loss,
            grad_norm=grad_norm,
            dl_pred=float(dl_pred),
            dl_real=loss_after - loss,
            subspace_ok=subspace_ok,
            b_ortho_residual=b_residual,
            a_ortho_residual=a_residual,
            core_grad_error=core_grad_error,
            eta=eta
        )
        logger.debug(f"step {step}: loss={loss:.6e} grad_norm={grad_norm:.3e} dl_pred={record.dl_pred:.3e} dl_real={record.dl_real:.3e}")
        return record


def prepare_adapters(
    model :ModelStack,
    config :TrainConfig,
    data :List[Batch])->Tuple[List[AdapterState], Optional[UpdateEstimate], InitRecipe]:
    """Resolves the recipe, estimates ΔW_avg at the model's current (pre-trained) weights when needed, builds the adapters."""
    recipe = resolve_recipe(
        config.recipe,
        train_eta=config.eta,
        train_optimizer=config.optimizer,
        num_samples=sum(batch.size for batch in data),
        batch_size=data[0].size,
        budget_fraction=config.budget_fraction
    )
    estimate = None
    kind = InitKind(recipe.kind)
    if config.method.uses_core and (kind.needs_estimate or kind == InitKind.ZERO_B):
        estimate = estimate_update(model, data, recipe)
    states = build_adapters(model, config.method, recipe, estimate, s=config.scale)
    return states, estimate, recipe

def train(
    model :ModelStack,
    config :TrainConfig,
    data :List[Batch],
    states :Optional[List[AdapterState]]=None,
    arm :Optional[str]=None)->RunReport:
    """
    Runs ``config.steps`` optimizer steps and returns the per-step report.

    Without ``states`` the adapters are initialized from ``config.recipe`` first,
    so ``model`` must hold the pre-trained weights. ``model`` ends at the trained
    effective weights.

    A non-finite gradient or loss stops the run early; the report is then
    marked ``diverged`` unless ``config.strict``, in which case it raises.
    """
    if not data:
        raise RejectedInputError("train: no data given")
    data = rebatch(data, config.batch_size)
    arm = arm or f"{config.method.value}_{InitKind(config.recipe.kind).value}_{GradientPathway(config.gradient_pathway).value}"

    start = time.perf_counter()
    samples_used = None
    if states is None:
        states, estimate, recipe = prepare_adapters(model, config, data)
        config = config.model_copy(update={"recipe": recipe})
        samples_used = estimate.samples_used if estimate is not None else None

    run = AdapterRun(model, states, config)
    initial_loss = evaluate(model, data)
    logger.info(f"[{arm} seed={config.seed}] training {config.steps} steps, {config.optimizer} eta={config.eta}, initial loss {initial_loss:.6e}")

    records = []
    diverged_at = None
    try:
        for step, batch in zip(range(1, config.steps + 1), batch_cycle(data, config.seed)):
            records.append(run.step(step, batch))
    except InvariantViolationError:
        raise
    except RunAbortedError as e:
        # non-strict: reported with diverged=True and an infinite final loss
        if config.strict:
            raise
        diverged_at = e.step
        logger.warning(f"[{arm} seed={config.seed}] diverged at step {e.step}: {e}")

    if not run.frozen_intact():
        logger.warning(f"[{arm} seed={config.seed}] frozen factors changed during training")

    final_loss = float("inf") if diverged_at is not None else evaluate(model, data)
    logger.info(f"[{arm} seed={config.seed}] final loss {final_loss:.6e}")
    return RunReport(
        arm=arm,
        seed=config.seed,
        config=config.model_dump(mode="json"),
        records=records,
        final_loss=final_loss,
        initial_loss=initial_loss,
        final_updates=[] if diverged_at is not None else [effective_update(st) for st in states],
        final_states=[] if diverged_at is not None else states,
        wall_clock_seconds=time.perf_counter() - start,
        samples_used=samples_used,
        diverged=diverged_at is not None,
        diverged_at=diverged_at
    )

def probe_stable_eta(
    model :ModelStack,
    states :List[AdapterState],
    data :List[Batch],
    start :float=PROBE_START_ETA,
    window :int=PROBE_WINDOW,
    max_halvings :int=PROBE_MAX_HALVINGS)->float:
    """
    Largest ``start / 2^k`` for which ``window`` consecutive corrected-pathway SGD
    steps never increase the loss on their batch. Works on copies; the arguments
    are not modified.
    """
    eta = start
    for _ in range(max_halvings + 1):
        config = TrainConfig(
            method=states[0].method,
            eta=eta,
            steps=window,
            gradient_pathway=GradientPathway.CORRECTED,
            check_every=window
        )
        run = AdapterRun(model.clone(), [st.copy_state() for st in states], config)
        try:
            stable = all(
                run.step(step, batch).dl_real <= DESCENT_TOL
                for step, batch in zip(range(1, window + 1), batch_cycle(data, 0))
            )
        except RunAbortedError:
            stable = False

        if stable:
            logger.debug(f"probe_stable_eta: eta={eta:.3e} is stable over {window} steps")
            return eta
        eta /= 2.0

    raise RunAbortedError(
        f"no stable learning rate found after {max_halvings} halvings of {start}",
        step=0,
        diagnostics={"last_eta": eta}
    )
