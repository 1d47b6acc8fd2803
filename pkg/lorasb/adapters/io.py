from ..core.common import dumps_json, loads_json, writeFile
from ..core.defaults import MANIFEST_FILE
from ..core.errors import RejectedInputError
from ..kernel.io import load_matrix, save_matrix
from .algebra import AdapterMethod, AdapterState

from typing import Any, Dict, List, Optional, Union
from pathlib import Path

FACTOR_FILES = {
    "w0": "w0.csv",
    "b": "b.csv",
    "r_mat": "r.csv",
    "a": "a.csv",
    "delta": "delta.csv"
}

def save_adapter_states(
    states :List[AdapterState],
    directory :Union[str, Path],
    metadata :Optional[Dict[str, Any]]=None)->Path:
    """
    ``manifest.json`` plus ``module_<i>/{w0,b,r,a,delta}.csv``; absent factors
    are simply not written, so two runs can be diffed file by file.
    """
    directory = Path(directory)
    modules = []
    for index, st in enumerate(states):
        module_dir = f"module_{index}"
        files = {}
        for name, filename in FACTOR_FILES.items():
            value = getattr(st, name)
            if value is None:
                continue
            save_matrix(value, directory / module_dir / filename)
            files[name] = f"{module_dir}/{filename}"

        modules.append({
            "method": st.method.value,
            "shape": list(st.shape),
            "rank": st.rank,
            "s": st.s,
            "trainable": st.trainable,
            "files": files
        })

    path = directory / MANIFEST_FILE
    writeFile(dumps_json({"modules": modules, "metadata": metadata or {}}), path)
    return path

def load_adapter_states(directory :Union[str, Path])->List[AdapterState]:
    directory = Path(directory)
    manifest = loads_json(directory / MANIFEST_FILE)
    states = []
    try:
        for entry in manifest["modules"]:
            factors = {name: load_matrix(directory / relpath) for name, relpath in entry["files"].items()}
            states.append(AdapterState(
                method=AdapterMethod(entry["method"]),
                s=entry["s"],
                rank=entry["rank"],
                **factors
            ))
    except (KeyError, TypeError) as e:
        raise RejectedInputError(f"{directory / MANIFEST_FILE} is malformed: {e}") from e
    return states
