from .defaults import DEFAULT_ENCODING, INSTALLATION_DIR

from typing import Any, Optional, Union
from pathlib import Path
import hashlib
import orjson

def readFile(path :Union[str, Path], mode :str="r", skip_errors :bool=False)->str:
    try:
        with open(path, mode, encoding=DEFAULT_ENCODING if mode != "rb" else None) as _file:
            contents = _file.read()
    except Exception as e:
        if skip_errors:
            return ""
        raise e

    return contents

def writeFile(contents: Union[str, bytes], path: Union[str, Path], mode: str = "w"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(contents, bytes):
        with open(path, "wb") as f:
            f.write(contents)
    else:
        with open(path, mode, encoding=DEFAULT_ENCODING, newline="") as f:
            f.write(contents)

def dumps_json(obj :Any, sort_keys :bool=False)->bytes:
    option = orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY
    if sort_keys:
        option |= orjson.OPT_SORT_KEYS
    return orjson.dumps(obj, option=option)

def loads_json(path :Union[str, Path])->Any:
    return orjson.loads(readFile(path, mode="rb"))

def config_hash(obj :Any)->str:
    """sha256 of the canonical (sorted-key, compact) JSON form of ``obj``."""
    canonical = orjson.dumps(obj, option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY)
    return hashlib.sha256(canonical).hexdigest()

def describe_version(path :Optional[Union[str, Path]]=None)->str:
    """
    Git-describe style version string for report headers.

    Uses the repository that contains ``path`` (defaults to the installation
    directory); falls back to the package version when no repository or no
    commits are found.
    """
    from lorasb import __version__

    from pygit2.enums import DescribeStrategy
    import pygit2

    start = str(path or INSTALLATION_DIR)
    try:
        repo_path = pygit2.discover_repository(start)
        if repo_path is None:
            return __version__
        repo = pygit2.Repository(repo_path)
        described = repo.describe(
            describe_strategy=DescribeStrategy.TAGS,
            show_commit_oid_as_fallback=True,
            dirty_suffix="-dirty"
        )
        return f"{__version__}+{described}"
    except (pygit2.GitError, KeyError, ValueError):
        return __version__
