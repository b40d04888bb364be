import hashlib
import json
import logging
import math
import os
from typing import Any, Iterable

import numpy as np
import polars as pl

logger = logging.getLogger(__name__)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if hasattr(value, "__dataclass_fields__"):
        return {name: _jsonable(getattr(value, name)) for name in value.__dataclass_fields__ if not name.startswith("_")}
    return value


def write_csv(frame: pl.DataFrame, path: str) -> str:
    """
    UTF-8 CSV with a header row, ``.`` decimals and LF line ends.
    """
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    frame.write_csv(path, line_terminator="\n")
    logger.debug("Wrote %s (%d rows)", path, frame.height)
    return path


def write_json(document: Any, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_jsonable(document), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.debug("Wrote %s", path)
    return path


def write_jsonl(records: Iterable[dict], path: str) -> str:
    """
    One JSON document per line, e.g. per-realization point lists.
    """
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(json.dumps(_jsonable(record), sort_keys=True))
            f.write("\n")
    return path


def read_jsonl(path: str) -> list:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def checksums(paths: Iterable[str], root: str) -> dict:
    """
    ``{relative path: sha256}`` for the given files.
    """
    return {os.path.relpath(p, root).replace(os.sep, "/"): sha256_file(p) for p in sorted(paths)}
