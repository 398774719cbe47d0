"""Atomic file output and JSON Lines helpers shared by the pipeline stages."""

from __future__ import annotations

import contextlib
import json
import os
import tempfile
from typing import Iterator


class SchemaMismatch(ValueError):
    """An input file was written by a different stage or format version."""


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


@contextlib.contextmanager
def atomic_open(path: str | os.PathLike, mode: str = "w") -> Iterator:
    """Write to a temporary file beside ``path`` and rename it into place on success."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        kwargs = {} if "b" in mode else {"encoding": "utf-8", "newline": "\n"}
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_text(path, text: str):
    with atomic_open(path) as fh:
        fh.write(text)


def write_jsonl(path, records):
    with atomic_open(path) as fh:
        for rec in records:
            fh.write(dumps(rec) + "\n")


def read_jsonl(path) -> Iterator[dict]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)


def require_schema(record: dict, expected: str, path) -> dict:
    got = record.get("schema")
    if got != expected:
        raise SchemaMismatch(f"{path}: expected schema {expected!r}, found {got!r}")
    return record
