"""JSON reading helpers that produce file/field-precise diagnostics."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Callable


class FileFormatError(ValueError):
    """An input file is malformed. The message names the file and field."""


def read_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(f"{path}: cannot read file ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from exc


def _number(value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TypeError("expected a number")
    out = float(value)
    if not math.isfinite(out):
        raise ValueError("expected a finite number")
    return out


def _integer(value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise TypeError("expected an integer")
    return value


def _boolean(value: Any) -> bool:
    if not isinstance(value, bool):
        raise TypeError("expected true or false")
    return value


def _string(value: Any) -> str:
    if not isinstance(value, str):
        raise TypeError("expected a string")
    return value


def _scalar_id(value: Any) -> int | str:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise TypeError("expected an integer or string id")
    return value


CONVERTERS: dict[str, Callable[[Any], Any]] = {
    "number": _number,
    "int": _integer,
    "bool": _boolean,
    "str": _string,
    "id": _scalar_id,
}

_MISSING = object()


class Fields:
    """A JSON object plus its location, for error messages like ``case.json: buses[2].kind``."""

    def __init__(self, data: Any, where: str):
        if not isinstance(data, dict):
            raise FileFormatError(f"{where}: expected an object")
        self.data = data
        self.where = where

    def _loc(self, key: str) -> str:
        return f"{self.where}.{key}" if not self.where.endswith(":") else f"{self.where} {key}"

    def get(self, key: str, kind: str = "number", default: Any = _MISSING) -> Any:
        if key not in self.data or self.data[key] is None:
            if default is _MISSING:
                raise FileFormatError(f"{self._loc(key)}: missing required field")
            return default
        try:
            return CONVERTERS[kind](self.data[key])
        except (TypeError, ValueError) as exc:
            raise FileFormatError(f"{self._loc(key)}: {exc} (got {self.data[key]!r})") from None

    def items(self, key: str, required: bool = True) -> list["Fields"]:
        raw = self.data.get(key)
        if raw is None:
            if required:
                raise FileFormatError(f"{self._loc(key)}: missing required field")
            return []
        if not isinstance(raw, list):
            raise FileFormatError(f"{self._loc(key)}: expected a list")
        return [Fields(item, f"{self._loc(key)}[{i}]") for i, item in enumerate(raw)]

    def raw(self, key: str, default: Any = None) -> Any:
        return self.data.get(key, default)

    def fail(self, key: str, message: str) -> FileFormatError:
        return FileFormatError(f"{self._loc(key)}: {message}")


def root(data: Any, path: str | Path) -> Fields:
    return Fields(data, f"{path}:")
