from ..core.common import readFile
from ..core.defaults import LAYOUT_SUFFIX, LAYOUTS_DIR
from ..core.errors import RejectedInputError
from .algebra import AdapterMethod, format_param_count, param_count

from pydantic import BaseModel, Field, PositiveInt, computed_field
from typing import Dict, List, Literal, Optional, Tuple, Union
from pathlib import Path
import yaml


class ArchLayout(BaseModel):
    """Adapted weight shapes of one transformer block, repeated ``num_layers`` times."""
    name :str
    num_layers :PositiveInt
    modules :Dict[str, Tuple[PositiveInt, PositiveInt]] = Field(min_length=1)
    display_unit :Literal["M", "K"] = "M"
    source :Optional[str] = None

    @computed_field
    @property
    def module_count(self)->int:
        return self.num_layers * len(self.modules)

    @property
    def module_shapes(self)->List[Tuple[int, int]]:
        return list(self.modules.values()) * self.num_layers

    def count(self, method :AdapterMethod, rank :int)->int:
        return param_count(method, self.module_shapes, rank)

    def formatted(self, method :AdapterMethod, rank :int)->str:
        return format_param_count(self.count(method, rank), self.display_unit)


def available_layouts()->List[str]:
    return sorted(path.stem for path in LAYOUTS_DIR.glob(f"*{LAYOUT_SUFFIX}"))

def resolve_layout_path(name_or_path :Union[str, Path])->Path:
    path = Path(name_or_path)
    if path.is_file():
        return path

    bundled = LAYOUTS_DIR / f"{path.name.removesuffix(LAYOUT_SUFFIX)}{LAYOUT_SUFFIX}"
    if bundled.is_file():
        return bundled
    raise RejectedInputError(
        f"layout {name_or_path!r} not found; bundled layouts: {', '.join(available_layouts())}"
    )

def load_layout(name_or_path :Union[str, Path])->ArchLayout:
    """Loads a bundled layout by name (``mistral7b``) or any ``.layout`` YAML file by path."""
    path = resolve_layout_path(name_or_path)
    try:
        document = yaml.safe_load(readFile(path))
    except yaml.YAMLError as e:
        raise RejectedInputError(f"layout {path} is not valid YAML: {e}") from e

    if not isinstance(document, dict):
        raise RejectedInputError(f"layout {path} must be a mapping, got {type(document).__name__}")
    return ArchLayout(**document)
