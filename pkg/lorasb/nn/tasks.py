from ..core.errors import RejectedInputError
from ..kernel.matrix import Matrix
from .model import Activation, Batch, LayerSpec, ModelStack, _activate

from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, NonNegativeInt, PositiveInt
from typing import List, Literal, Optional
import numpy as np

InputDistribution = Literal["gaussian", "whitened"]


class TaskSpec(BaseModel):
    """Everything needed to regenerate a teacher-student task bit for bit."""
    m :PositiveInt = 64
    n :PositiveInt = 64
    r_true :NonNegativeInt = 4
    num_samples :PositiveInt = 1024
    noise_std :NonNegativeFloat = 0.0
    seed :int = 0
    batch_size :Optional[PositiveInt] = 64
    activation :Activation = "identity"
    input_distribution :InputDistribution = "whitened"


class TeacherStudentTask(BaseModel):
    spec :TaskSpec
    batches :List[Batch] = Field(min_length=1)
    w0 :Matrix
    w_target :Matrix

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def num_samples(self)->int:
        return sum(batch.size for batch in self.batches)

    def _single_layer(self, weight :Matrix)->ModelStack:
        spec = LayerSpec(in_dim=self.spec.n, out_dim=self.spec.m, activation=self.spec.activation)
        return ModelStack(layers=[spec], weights=[weight.copy()], loss="mse")

    def student(self)->ModelStack:
        """Fresh single-layer model at the pre-trained weight W0."""
        return self._single_layer(self.w0)

    def teacher(self)->ModelStack:
        return self._single_layer(self.w_target)


def _whitened_inputs(rng :np.random.Generator, batch_size :int, n :int)->np.ndarray:
    # orthonormal columns scaled so that X.T @ X / batch_size == I
    frame, _ = np.linalg.qr(rng.normal(size=(batch_size, n)))
    return np.sqrt(batch_size) * frame

def make_teacher_student_task(
    m :int,
    n :int,
    r_true :int,
    num_samples :int,
    noise_std :float,
    seed :int,
    batch_size :Optional[int]=None,
    activation :Activation="identity",
    input_distribution :InputDistribution="whitened")->TeacherStudentTask:
    """
    Synthetic fine-tuning task: the student starts at W0 and the data comes from
    ``W_target = W0 + U @ V.T / sqrt(r_true)``, a rank-``r_true`` perturbation.

    ``y = act(x @ W_target.T) + noise``; the same ``seed`` yields bit-identical tasks.
    """
    for name, value in (("m", m), ("n", n), ("num_samples", num_samples)):
        if not isinstance(value, (int, np.integer)) or value < 1:
            raise RejectedInputError(f"make_teacher_student_task: {name} must be a positive integer, got {value!r}")
    if not isinstance(r_true, (int, np.integer)) or not 0 <= r_true <= min(m, n):
        raise RejectedInputError(f"make_teacher_student_task: r_true {r_true!r} outside [0, {min(m, n)}]")
    if noise_std < 0 or not np.isfinite(noise_std):
        raise RejectedInputError(f"make_teacher_student_task: noise_std must be finite and >= 0, got {noise_std}")

    batch_size = batch_size or num_samples
    if batch_size < 1 or batch_size > num_samples:
        raise RejectedInputError(f"make_teacher_student_task: batch_size {batch_size} outside [1, {num_samples}]")
    if input_distribution == "whitened":
        if batch_size < n:
            raise RejectedInputError(f"whitened inputs need batch_size >= n, got {batch_size} < {n}")
        if num_samples % batch_size:
            raise RejectedInputError(f"whitened inputs need num_samples divisible by batch_size ({num_samples} % {batch_size})")

    spec = TaskSpec(
        m=m, n=n, r_true=r_true, num_samples=num_samples, noise_std=noise_std, seed=seed,
        batch_size=batch_size, activation=activation, input_distribution=input_distribution
    )

    rng = np.random.default_rng(seed)
    w0 = rng.normal(0.0, 1.0 / np.sqrt(n), size=(m, n))
    if r_true:
        u = rng.normal(size=(m, r_true))
        v = rng.normal(size=(n, r_true))
        w_target = w0 + (u @ v.T) / np.sqrt(r_true)
    else:
        w_target = w0.copy()

    batches = []
    for start in range(0, num_samples, batch_size):
        size = min(batch_size, num_samples - start)
        if input_distribution == "whitened":
            inputs = _whitened_inputs(rng, size, n)
        else:
            inputs = rng.normal(size=(size, n))
        targets = _activate(inputs @ w_target.T, activation)
        if noise_std:
            targets = targets + noise_std * rng.normal(size=targets.shape)
        batches.append(Batch(inputs=inputs, targets=targets))

    return TeacherStudentTask(spec=spec, batches=batches, w0=w0, w_target=w_target)

def task_from_spec(spec :TaskSpec)->TeacherStudentTask:
    return make_teacher_student_task(**spec.model_dump())
