"""Flat ``key = value`` text files with ``#`` comments."""

from __future__ import annotations

from pathlib import Path
from typing import Union


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def read_kv(path: Union[str, Path]) -> dict[str, str]:
    return parse_kv(Path(path).read_text(encoding="utf-8"))
