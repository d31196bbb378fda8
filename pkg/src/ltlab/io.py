"""File input/output for fields and result documents."""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InvalidInputError
from .grid import PotentialField

__all__ = ["load_field", "save_field", "to_jsonable", "dumps", "JsonLinesAppender"]


def load_field(path, dim: int | None = None) -> PotentialField:
    """Read a :class:`PotentialField` from ``.csv`` or ``.json``."""
    p = Path(path)
    if not p.is_file():
        raise InvalidInputError(f"field file not found: {p}")
    if p.suffix.lower() == ".json":
        data = json.loads(p.read_text())
        if "grid" not in data and "payload" in data:
            data = data["payload"]["V_star"]
        return PotentialField.from_json_dict(data)
    return PotentialField.from_csv(p, dim=dim)


def save_field(V: PotentialField, path) -> Path:
    """Write ``V`` as CSV or JSON depending on the suffix of ``path``."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    if p.suffix.lower() == ".json":
        p.write_text(V.to_json())
    else:
        V.to_csv(p)
    return p


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays, tuples and objects with ``to_dict`` to JSON types.

    Non-finite floats become the strings ``"nan"``, ``"inf"``, ``"-inf"`` so
    that documents stay strict JSON.
    """
    if hasattr(obj, "to_dict") and not isinstance(obj, type):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if f != f:
            return "nan"
        if f in (float("inf"), float("-inf")):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def dumps(obj: Any, **kwargs) -> str:
    """Deterministic JSON (sorted keys, shortest round-trip floats)."""
    return json.dumps(to_jsonable(obj), sort_keys=True, allow_nan=False, **kwargs)


class JsonLinesAppender:
    """Serialize writes of one JSON document per line to a single file.

    All writers share one lock, and each line is written with a single
    ``write`` call followed by a flush, so concurrent producers never
    interleave partial lines.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, obj: Any) -> None:
        line = dumps(obj) + "\n"
        with self._lock:
            self._fh.write(line)
            self._fh.flush()
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        with self._lock:
            if not self._fh.closed:
                self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
