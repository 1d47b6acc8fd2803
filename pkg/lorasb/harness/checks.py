from ..adapters.algebra import AdapterFactors, AdapterMethod, AdapterState, effective_update, subspace_membership
from ..core.defaults import DESCENT_TOL
from ..core.logs import logger
from ..gradients.law import (
    GradientPathway, equivalent_update, optimal_correction, predicted_loss_decrement,
    scale_invariance_report, xs_gradient
)
from ..initializers.estimate import estimate_update
from ..initializers.factors import apply_adapters, init_lora_sb
from ..initializers.recipes import InitKind, InitRecipe, OptimizerModel
from ..kernel.matrix import relative_error, truncated_svd
from ..nn.model import Batch, LayerSpec, ModelStack, backward, forward
from ..nn.tasks import make_teacher_student_task
from ..oracles.suite import (
    OracleResult, best_rank_r_oracle, fd_gradient_oracle, fd_r_gradient_oracle, lstsq_oracle,
    singular_values_oracle, vector_relative_error
)
from ..training.trainer import TrainConfig, train

from pydantic import BaseModel, computed_field
from typing import Callable, Dict, List, Literal, Optional
import numpy as np

Suite = Literal["all", "lemma1", "lemma2", "thm1", "thm2", "thm3", "thm4", "eckart_young", "gradcheck"]


class CheckReport(BaseModel):
    suite :Suite
    seed :int
    results :List[OracleResult]

    @computed_field
    @property
    def passed(self)->bool:
        return all(result.passed for result in self.results)

    @computed_field
    @property
    def first_failure(self)->Optional[OracleResult]:
        return next((result for result in self.results if not result.passed), None)


def _orthonormal(rng :np.random.Generator, rows :int, cols :int)->np.ndarray:
    q, _ = np.linalg.qr(rng.normal(size=(rows, cols)))
    return q

def _core_state(
    rng :np.random.Generator,
    m :int,
    n :int,
    r :int,
    s :float=1.0,
    orthonormal :bool=False,
    method :AdapterMethod=AdapterMethod.LORA_XS)->AdapterState:
    if orthonormal:
        b, a = _orthonormal(rng, m, r), _orthonormal(rng, n, r).T
    else:
        b, a = rng.normal(size=(m, r)), rng.normal(size=(r, n))
    factors = AdapterFactors(b=b, a=a, r_mat=rng.normal(size=(r, r)), s=s)
    return AdapterState.from_factors(method, rng.normal(size=(m, n)), factors)

def _objective(st :AdapterState, x :np.ndarray, g :np.ndarray)->float:
    return float(np.linalg.norm(st.s * (st.b @ x @ st.a) - g))

def _small_task(seed :int, m :int=16, n :int=16, r_true :int=2):
    return make_teacher_student_task(
        m=m, n=n, r_true=r_true, num_samples=4 * n, noise_std=0.0, seed=seed,
        batch_size=n, input_distribution="whitened"
    )

def check_lemma1(seed :int=0, trials :int=100)->List[OracleResult]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        m, n = rng.integers(4, 17, size=2)
        r = int(rng.integers(1, min(m, n) + 1))
        st = _core_state(rng, int(m), int(n), r, orthonormal=True)
        p_b = st.b @ st.b.T
        p_a = st.a.T @ st.a
        update = effective_update(st)
        worst = max(worst, float(np.linalg.norm(p_b @ update @ p_a - update)))
    results = [OracleResult(name="lemma1/projector_residual", deviation=worst, tolerance=1e-10, measured=worst)]

    st = _core_state(rng, 12, 10, 3, orthonormal=True)
    outside = np.linalg.qr(np.concatenate([st.b, rng.normal(size=(12, 1))], axis=1))[0][:, -1:]
    escaped = effective_update(st) + outside @ st.a[:1, :]
    results.append(OracleResult(
        name="lemma1/orthogonal_component_detected",
        deviation=float(subspace_membership(st, escaped, tol=1e-6)),
        tolerance=0.0
    ))

    task = _small_task(seed)
    for method, kind in ((AdapterMethod.LORA_SB, InitKind.LORA_SB), (AdapterMethod.LORA_XS, InitKind.PISSA_STYLE)):
        config = TrainConfig(method=method, recipe=InitRecipe(kind=kind, rank=2, seed=seed), steps=50, seed=seed)
        report = train(task.student(), config, task.batches)
        failures = sum(record.subspace_ok is not True for record in report.records)
        results.append(OracleResult(name=f"lemma1/run_{method.value}_{kind.value}", deviation=failures, tolerance=0, measured=failures))

    config = TrainConfig(
        method=AdapterMethod.LORA_XS,
        recipe=InitRecipe(kind=InitKind.ZERO_B, rank=2, seed=seed),
        gradient_pathway=GradientPathway.RAW_XS,
        steps=200,
        seed=seed
    )
    report = train(task.student(), config, task.batches)
    losses = np.array(report.losses)
    drift = float(np.max(np.abs(losses - losses[0])) / max(1.0, abs(losses[0])))
    results.append(OracleResult(name="lemma1/zero_b_constant_loss", deviation=drift, tolerance=1e-12, measured=drift))
    return results

def check_lemma2(seed :int=0, configurations :int=20)->List[OracleResult]:
    rng = np.random.default_rng(seed)
    results = []
    for index in range(configurations):
        dims = [int(d) for d in rng.integers(4, 9, size=3)]
        loss = "mse" if index % 2 == 0 else "softmax_cross_entropy"
        model = ModelStack.random(dims, activation="tanh", loss=loss, seed=seed * 1000 + index)
        inputs = rng.normal(size=(6, dims[0]))
        targets = rng.normal(size=(6, dims[-1])) if loss == "mse" else np.eye(dims[-1])[rng.integers(0, dims[-1], size=6)]
        batch = Batch(inputs=inputs, targets=targets)

        r = int(rng.integers(1, min(dims[1], dims[0]) + 1))
        states = []
        for layer, weight in enumerate(model.weights):
            m, n = weight.shape
            factors = AdapterFactors(
                b=rng.normal(size=(m, min(r, m, n))),
                a=rng.normal(size=(min(r, m, n), n)),
                r_mat=0.3 * rng.normal(size=(min(r, m, n), min(r, m, n))),
                s=float(rng.uniform(0.5, 2.0))
            )
            states.append(AdapterState.from_factors(AdapterMethod.LORA_XS, weight, factors))
        apply_adapters(model, states)

        _, cache = forward(model, batch)
        grads = backward(model, cache)
        module = index % len(states)
        analytic = xs_gradient(states[module], grads.weights[module])
        numeric = fd_r_gradient_oracle(model, batch, states, module)
        error = vector_relative_error(numeric, analytic)
        results.append(OracleResult(name=f"lemma2/config_{index}", deviation=error, tolerance=1e-6, measured=error))
    return results

def check_thm1(seed :int=0, instances :int=200)->List[OracleResult]:
    rng = np.random.default_rng(seed)
    worst_agreement = 0.0
    worst_gain = 0.0
    for _ in range(instances):
        r = int(rng.integers(1, 5))
        m, n = (int(d) for d in rng.integers(r + 3, 13, size=2))
        st = _core_state(rng, m, n, r, s=float(rng.uniform(0.5, 3.0)))
        g = rng.normal(size=(m, n))

        corrected = optimal_correction(st, xs_gradient(st, g))
        worst_agreement = max(worst_agreement, relative_error(corrected, lstsq_oracle(st.b, st.a, g, st.s)))

        delta = rng.normal(size=(r, r))
        delta *= 1e-3 / np.linalg.norm(delta)
        worst_gain = max(worst_gain, _objective(st, corrected, g) - _objective(st, corrected + delta, g))

    return [
        OracleResult(name="thm1/lstsq_agreement", deviation=worst_agreement, tolerance=1e-8, measured=worst_agreement),
        OracleResult(name="thm1/perturbation_never_improves", deviation=max(0.0, worst_gain), tolerance=1e-12, measured=worst_gain)
    ]

def check_thm2(seed :int=0, trials :int=1000, live :int=20)->List[OracleResult]:
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(trials):
        r = int(rng.integers(1, 5))
        m, n = (int(d) for d in rng.integers(r + 3, 11, size=2))
        st = _core_state(rng, m, n, r, s=float(rng.uniform(0.25, 4.0)))
        g_r_xs = xs_gradient(st, rng.normal(size=(m, n)))
        worst = max(worst, predicted_loss_decrement(g_r_xs, optimal_correction(st, g_r_xs), float(rng.uniform(0.0, 1.0))))
    results = [OracleResult(name="thm2/predicted_decrement_nonpositive", deviation=max(0.0, worst), tolerance=DESCENT_TOL, measured=worst)]

    worst_gap = 0.0
    for index in range(live):
        task = _small_task(seed * 1000 + index, m=12, n=12, r_true=3)
        kind = InitKind.LORA_SB if index % 2 == 0 else InitKind.NONORTHO_SB
        config = TrainConfig(
            recipe=InitRecipe(kind=kind, rank=3, eta=0.5, optimizer_model=OptimizerModel.SGD, seed=index),
            eta=1e-6,
            steps=1
        )
        report = train(task.student(), config, task.batches)
        record = report.records[0]
        worst_gap = max(worst_gap, abs(record.dl_real - record.dl_pred) - 0.05 * abs(record.dl_pred))
    results.append(OracleResult(name="thm2/realized_matches_first_order", deviation=max(0.0, worst_gap), tolerance=1e-12, measured=worst_gap))
    return results

def check_thm3(seed :int=0, instances :int=20)->List[OracleResult]:
    rng = np.random.default_rng(seed)
    scales = [0.25, 1.0, 4.0, 16.0]
    corrected = ratio = projector = 0.0
    for _ in range(instances):
        r = int(rng.integers(1, 5))
        m, n = (int(d) for d in rng.integers(r + 3, 13, size=2))
        st = _core_state(rng, m, n, r)
        report = scale_invariance_report(st, rng.normal(size=(m, n)), scales)
        corrected = max(corrected, report.corrected_max_deviation)
        ratio = max(ratio, report.max_raw_ratio_error)
        projector = max(projector, report.projector_deviation)

    return [
        OracleResult(name="thm3/corrected_scale_invariant", deviation=corrected, tolerance=1e-8, measured=corrected, reference=scales),
        OracleResult(name="thm3/raw_scales_as_s_squared", deviation=ratio, tolerance=1e-6, measured=ratio),
        OracleResult(name="thm3/projector_form", deviation=projector, tolerance=1e-9, measured=projector)
    ]

def check_thm4(seed :int=0, instances :int=20, eta :float=0.1)->List[OracleResult]:
    rng = np.random.default_rng(seed)
    worst_oracle = worst_projector = 0.0
    for index in range(instances):
        m, n = (int(d) for d in rng.integers(6, 17, size=2))
        r = int(rng.integers(1, 5))
        model = ModelStack(layers=[LayerSpec(in_dim=n, out_dim=m)], weights=[rng.normal(size=(m, n)) / np.sqrt(n)])
        batch = Batch(inputs=rng.normal(size=(32, n)), targets=rng.normal(size=(32, m)))

        recipe = InitRecipe(rank=r, eta=eta, optimizer_model=OptimizerModel.SGD, sample_budget=32, seed=index)
        estimate = estimate_update(model, [batch], recipe)
        st = AdapterState.from_factors(AdapterMethod.LORA_SB, model.weights[0], init_lora_sb(estimate.deltas[0], r))

        _, cache = forward(model, batch)
        g = backward(model, cache).weights[0]
        update = equivalent_update(st, g, eta)
        worst_oracle = max(worst_oracle, relative_error(update, best_rank_r_oracle(-eta * g, r)))
        worst_projector = max(worst_projector, relative_error(update, st.b @ st.b.T @ (-eta * g) @ st.a.T @ st.a))

    return [
        OracleResult(name="thm4/first_step_is_best_rank_r", deviation=worst_oracle, tolerance=1e-8, measured=worst_oracle),
        OracleResult(name="thm4/first_step_projector_form", deviation=worst_projector, tolerance=1e-8, measured=worst_projector)
    ]

def check_eckart_young(seed :int=0, instances :int=100, candidates :int=500)->List[OracleResult]:
    rng = np.random.default_rng(seed)
    worst_oracle = worst_tail = 0.0
    for _ in range(instances):
        m, n = (int(d) for d in rng.integers(4, 17, size=2))
        r = int(rng.integers(1, min(m, n, 8) + 1))
        delta = rng.normal(size=(m, n))
        factors = init_lora_sb(delta, r)
        product = factors.s * (factors.b @ factors.r_mat @ factors.a)
        worst_oracle = max(worst_oracle, relative_error(product, best_rank_r_oracle(delta, r)))

        tail = float(np.sqrt(np.sum(singular_values_oracle(delta)[r:] ** 2)))
        residual = float(np.linalg.norm(delta - product))
        worst_tail = max(worst_tail, abs(residual - tail) / max(tail, 1e-300) if tail else residual)

    delta = rng.normal(size=(16, 12))
    r = 3
    factors = init_lora_sb(delta, r)
    best = float(np.linalg.norm(delta - factors.s * (factors.b @ factors.r_mat @ factors.a)))
    top = truncated_svd(delta, r)
    gain = -np.inf
    for index in range(candidates):
        if index % 2:
            candidate = rng.normal(size=(16, r)) @ rng.normal(size=(r, 12))
        else:
            u = top.u + 1e-3 * rng.normal(size=top.u.shape)
            vt = top.vt + 1e-3 * rng.normal(size=top.vt.shape)
            candidate = (u * top.s) @ vt
        gain = max(gain, best - float(np.linalg.norm(delta - candidate)))

    return [
        OracleResult(name="eckart_young/init_matches_oracle", deviation=worst_oracle, tolerance=1e-8, measured=worst_oracle),
        OracleResult(name="eckart_young/residual_is_tail_energy", deviation=worst_tail, tolerance=1e-8, measured=worst_tail),
        OracleResult(name="eckart_young/no_better_candidate", deviation=max(0.0, gain), tolerance=1e-12, measured=gain)
    ]

def check_gradcheck(seed :int=0, models :int=50, coordinates :int=100)->List[OracleResult]:
    rng = np.random.default_rng(seed)
    activations = ["identity", "relu", "tanh"]
    results = []
    for index in range(models):
        depth = int(rng.integers(1, 4))
        dims = [int(d) for d in rng.integers(2, 9, size=depth + 1)]
        loss = "mse" if index % 2 == 0 else "softmax_cross_entropy"
        activation = activations[index % 3]
        model = ModelStack.random(dims, activation=activation, loss=loss, has_bias=bool(index % 4 == 1), seed=seed * 1000 + index)

        inputs = rng.normal(size=(4, dims[0]))
        targets = rng.normal(size=(4, dims[-1])) if loss == "mse" else np.eye(dims[-1])[rng.integers(0, dims[-1], size=4)]
        batch = Batch(inputs=inputs, targets=targets)

        _, cache = forward(model, batch)
        analytic = backward(model, cache).weights
        pool = [(layer, i, j) for layer, w in enumerate(model.weights) for i, j in np.ndindex(*w.shape)]
        chosen = [pool[k] for k in rng.choice(len(pool), size=min(coordinates, len(pool)), replace=False)]

        measured, reference = [], []
        for layer in sorted({c[0] for c in chosen}):
            coords = [(i, j) for l, i, j in chosen if l == layer]
            numeric = fd_gradient_oracle(model, batch, layer, coordinates=coords)
            measured.extend(numeric[i, j] for i, j in coords)
            reference.extend(analytic[layer][i, j] for i, j in coords)

        error = vector_relative_error(measured, reference)
        results.append(OracleResult(
            name=f"gradcheck/{activation}_{loss}_depth{depth}_{index}",
            deviation=error,
            tolerance=1e-6,
            measured=error,
            detail=f"dims={dims}"
        ))
    return results

SUITES :Dict[str, Callable[..., List[OracleResult]]] = {
    "lemma1": check_lemma1,
    "lemma2": check_lemma2,
    "thm1": check_thm1,
    "thm2": check_thm2,
    "thm3": check_thm3,
    "thm4": check_thm4,
    "eckart_young": check_eckart_young,
    "gradcheck": check_gradcheck
}

def run_checks(suite :Suite="all", seed :int=0)->CheckReport:
    """Runs one property battery (or all of them) with fixed seeds."""
    names = list(SUITES) if suite == "all" else [suite]
    results :List[OracleResult] = []
    for name in names:
        if name not in SUITES:
            raise KeyError(f"unknown check suite {name!r}")
        suite_results = SUITES[name](seed=seed)
        failed = sum(not result.passed for result in suite_results)
        log = logger.warning if failed else logger.info
        log(f"check {name}: {len(suite_results) - failed}/{len(suite_results)} passed")
        results.extend(suite_results)
    return CheckReport(suite=suite, seed=seed, results=results)
