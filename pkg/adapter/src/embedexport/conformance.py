"""Byte-level conformance checks against golden dumps.

A golden manifest is JSON: ``{"files": {"relative/path": "<hex>"}}``.
A directory conforms when it contains exactly the listed files with
exactly the listed bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ConfigError


def make_golden(dir_path: str | Path) -> dict:
    dir_path = Path(dir_path)
    files = {p.relative_to(dir_path).as_posix(): p.read_bytes().hex()
             for p in sorted(dir_path.rglob("*")) if p.is_file()}
    if not files:
        raise ConfigError(f"{dir_path} contains no files")
    return {"files": files}


def check_against_golden(dir_path: str | Path, golden: dict) -> list[str]:
    """Returns a list of human-readable mismatches; empty means conformant."""
    dir_path = Path(dir_path)
    expected = golden.get("files")
    if not isinstance(expected, dict) or not expected:
        raise ConfigError("golden manifest has no 'files' table")
    problems = []
    actual = {p.relative_to(dir_path).as_posix(): p
              for p in sorted(dir_path.rglob("*")) if p.is_file()}
    for rel, hexdump in expected.items():
        if rel not in actual:
            problems.append(f"missing file: {rel}")
        elif actual[rel].read_bytes().hex() != hexdump:
            problems.append(f"byte mismatch: {rel}")
    for rel in actual:
        if rel not in expected:
            problems.append(f"unexpected file: {rel}")
    return problems


def load_golden(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load golden manifest {path}: {exc}") from exc
