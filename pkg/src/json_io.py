import json
from pathlib import Path
from typing import Any, Union

from src.errors import ManifestError


def read_json(path: Union[str, Path], what: str = "File") -> Any:
    """Parsed JSON content; a missing or unparsable file is a ManifestError naming the path"""
    path = Path(path)
    if not path.is_file():
        raise ManifestError(f"{what} not found", str(path))
    with open(path, "r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except ValueError as e:
            raise ManifestError(f"{what} is not valid JSON ({e})", str(path))
