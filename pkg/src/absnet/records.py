"""Line-delimited record files.

Every structured text file in this project (scenario files, config files) is a
sequence of lines of the form

    kind key=value key=value ...

with '#' comment lines and blank lines ignored. Values never contain spaces;
floats are written with repr so that a write/read round trip is exact.
"""

from __future__ import annotations

import os
import tempfile
from typing import Any, Callable, Iterable


class RecordError(ValueError):
    """Malformed record file; message names the offending line/field."""


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return "none"
    text = str(value)
    if not text or any(ch.isspace() for ch in text) or "=" in text:
        raise RecordError(f"value {text!r} cannot be serialized in a record field")
    return text


def format_record(kind: str, fields: dict[str, Any]) -> str:
    parts = [kind]
    for key, value in fields.items():
        parts.append(f"{key}={_format_value(value)}")
    return " ".join(parts)


def parse_record_lines(text: str) -> list[tuple[int, str, dict[str, str]]]:
    """Parse file text into (line_number, kind, raw string fields) triples."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        kind = parts[0]
        fields: dict[str, str] = {}
        for part in parts[1:]:
            if "=" not in part:
                raise RecordError(f"line {lineno}: token {part!r} is not key=value")
            key, _, value = part.partition("=")
            if not key:
                raise RecordError(f"line {lineno}: empty field name")
            if key in fields:
                raise RecordError(f"line {lineno}: duplicate field {kind}.{key}")
            fields[key] = value
        out.append((lineno, kind, fields))
    return out


def parse_bool(text: str) -> bool:
    if text in ("1", "true", "True"):
        return True
    if text in ("0", "false", "False"):
        return False
    raise RecordError(f"expected boolean 0/1, got {text!r}")


def coerce_fields(kind: str, raw: dict[str, str], spec: dict[str, Callable[[str], Any]],
                  required: Iterable[str] = ()) -> dict[str, Any]:
    """Convert raw string fields through spec; reject unknown/missing keys."""
    out: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in spec:
            raise RecordError(f"unknown field {kind}.{key}")
        try:
            out[key] = spec[key](value)
        except (ValueError, TypeError) as exc:
            raise RecordError(f"bad value for {kind}.{key}: {exc}") from exc
    for key in required:
        if key not in out:
            raise RecordError(f"missing required field {kind}.{key}")
    return out


def atomic_write_text(path: str, text: str) -> None:
    """Write text so that the file at path is never observed half-written."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
