"""Shared plumbing: stable seeding, canonical hashing, bounded parallelism."""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV_VAR = "CTXD_SCDV_THREADS"


def stable_seed(*parts: object) -> int:
    """Derive a 64-bit seed from arbitrary parts, stable across processes.

    Python's builtin hash() is randomized per process, so seeds for
    per-unit work (one clustering job per word, one repeat per eval run)
    go through blake2b instead. Results are independent of scheduling
    order and worker count by construction.
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def canonical_json(obj: object) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(obj: object) -> str:
    """Short content hash of a JSON-serializable config mapping."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:16]


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def ordered_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Map fn over items, optionally in a thread pool.

    Results come back in input order regardless of completion order, so
    output never depends on the worker count.
    """
    workers = worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def read_jsonl(path) -> Iterable[tuple[int, dict]]:
    """Yield (1-based line number, parsed object) for every nonempty line."""
    from .errors import DataError

    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from exc
