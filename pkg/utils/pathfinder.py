import os
from pathlib import Path


def output_path(path: str | os.PathLike) -> Path:
    """
    Resolve an output file path and make sure its parent folder exists.
    """
    target = Path(path).expanduser()
    target.parent.mkdir(parents=True, exist_ok=True)
    return target


def sibling_path(path: str | os.PathLike, suffix: str) -> Path:
    """
    Path next to `path` sharing its stem, e.g. model.json -> model.report.json.
    """
    base = Path(path)
    return base.with_name(f"{base.stem}{suffix}")
