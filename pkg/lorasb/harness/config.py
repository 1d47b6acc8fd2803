from ..adapters.algebra import AdapterMethod
from ..core.common import readFile
from ..core.defaults import (
    CORE_GRAD_CHECK_TOL, DEFAULT_BUDGET_FRACTION, DEFAULT_LR_SCHEDULE, DEFAULT_OUTPUT_DIR, DEFAULT_SUBSPACE_TOL,
    DEFAULT_WARMUP_RATIO
)
from ..core.errors import RejectedInputError
from ..gradients.law import GradientPathway
from ..initializers.recipes import InitKind, InitRecipe
from ..nn.tasks import TaskSpec
from ..training.optimizers import AdamWConfig, LRSchedule
from ..training.trainer import TrainConfig

from pydantic import BaseModel, Field, PositiveFloat, PositiveInt, model_validator
from typing import List, Literal, Optional, Union
from pathlib import Path
import orjson
import yaml


class ArmSpec(BaseModel):
    """One compared configuration: adapter method, initialization and gradient pathway."""
    name :Optional[str] = None
    method :AdapterMethod = AdapterMethod.LORA_SB
    recipe :InitRecipe = Field(default_factory=InitRecipe)
    gradient_pathway :GradientPathway = GradientPathway.CORRECTED

    @property
    def label(self)->str:
        if self.name:
            return self.name
        label = f"{self.method.value}_{InitKind(self.recipe.kind).value}"
        if self.recipe.kind == InitKind.NOISY_SB:
            label += f"_sigma{self.recipe.sigma:g}"
        return f"{label}_{GradientPathway(self.gradient_pathway).value}"


class TrainSettings(BaseModel):
    """Training fields shared by every arm so that comparisons stay fair."""
    optimizer :Literal["sgd", "adamw"] = "sgd"
    adamw :AdamWConfig = Field(default_factory=AdamWConfig)
    eta :PositiveFloat = 0.5
    steps :PositiveInt = 500
    s :Optional[PositiveFloat] = None
    alpha :Optional[PositiveFloat] = None
    lr_schedule :LRSchedule = DEFAULT_LR_SCHEDULE
    warmup_ratio :float = Field(default=DEFAULT_WARMUP_RATIO, ge=0.0, lt=1.0)
    budget_fraction :float = Field(default=DEFAULT_BUDGET_FRACTION, gt=0.0, le=1.0)
    strict :bool = False
    subspace_tol :PositiveFloat = DEFAULT_SUBSPACE_TOL
    core_grad_tol :PositiveFloat = CORE_GRAD_CHECK_TOL
    check_every :PositiveInt = 1


class ExperimentConfig(BaseModel):
    name :str = "experiment"
    task :TaskSpec = Field(default_factory=TaskSpec)
    arms :List[ArmSpec] = Field(min_length=1)
    train :TrainSettings = Field(default_factory=TrainSettings)
    output_dir :str = DEFAULT_OUTPUT_DIR
    seeds :List[int] = Field(default_factory=lambda: [0], min_length=1)

    @model_validator(mode="after")
    def distinct_arms(self)->"ExperimentConfig":
        labels = [arm.label for arm in self.arms]
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        if duplicates:
            raise ValueError(f"arm labels must be unique, duplicated: {duplicates}")
        for arm in self.arms:
            if arm.recipe.rank > min(self.task.m, self.task.n):
                raise ValueError(f"arm {arm.label}: rank {arm.recipe.rank} exceeds min({self.task.m}, {self.task.n})")
        return self

    def task_for_seed(self, seed :int)->TaskSpec:
        return self.task.model_copy(update={"seed": seed})

    def train_config(self, arm :ArmSpec, seed :int)->TrainConfig:
        settings = self.train.model_dump()
        return TrainConfig(
            method=arm.method,
            recipe=arm.recipe.model_copy(update={"seed": seed}),
            gradient_pathway=arm.gradient_pathway,
            seed=seed,
            **settings
        )


def load_experiment_config(path :Union[str, Path])->ExperimentConfig:
    """Reads an ExperimentConfig from a ``.json`` or ``.yml``/``.yaml`` document."""
    path = Path(path)
    suffix = path.suffix.lower()
    try:
        if suffix == ".json":
            document = orjson.loads(readFile(path, mode="rb"))
        elif suffix in (".yml", ".yaml"):
            document = yaml.safe_load(readFile(path))
        else:
            raise RejectedInputError(f"config {path} must be .json, .yml or .yaml")
    except (orjson.JSONDecodeError, yaml.YAMLError) as e:
        raise RejectedInputError(f"config {path} could not be parsed: {e}") from e

    if not isinstance(document, dict):
        raise RejectedInputError(f"config {path} must be a mapping at the top level")
    return ExperimentConfig(**document)
