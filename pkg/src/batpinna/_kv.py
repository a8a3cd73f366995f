"""Flat ``name = value`` text files used for configs and model parameters."""

from __future__ import annotations

from pathlib import Path


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'name = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        out[key] = value
    return out


def read_kv(path) -> dict[str, str]:
    return parse_kv(Path(path).read_text())


def format_kv(values: dict) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in values.items())


def write_kv(path, values: dict) -> None:
    Path(path).write_text(format_kv(values))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)
