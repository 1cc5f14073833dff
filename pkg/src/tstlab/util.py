"""Shared plumbing: deterministic serialization, worker caps, RNG threading."""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

THREADS_ENV = "TSTLAB_THREADS"


def worker_count() -> int:
    """Worker-thread cap: value of TSTLAB_THREADS, else 1.

    Defaulting to one worker keeps byte-identical output the cheap path;
    results are reduced in sorted order either way.
    """
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if value < 1:
        raise ValueError(f"{THREADS_ENV} must be >= 1, got {value}")
    cpus = os.cpu_count() or 1
    return min(value, cpus)


def format_float(x: float) -> str:
    """17 significant digits: enough to round-trip a float64 exactly."""
    return f"{float(x):.17g}"


def dump_json(obj, path=None) -> str:
    """Deterministic JSON: sorted keys, fixed separators, trailing newline."""
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if path is not None:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    return text


def jsonable(value):
    """Coerce numpy scalars/arrays so dump_json accepts them."""
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    return value


def _stream_key(part) -> int:
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    return int(part)


def spawn_rng(seed: int, *stream) -> np.random.Generator:
    """Independent generator for (seed, stream...) without shared state.

    Stream parts may be ints or strings; strings hash stably so call sites
    can label their randomness without coordinating numeric ids.
    """
    keys = [int(seed)] + [_stream_key(p) for p in stream]
    return np.random.default_rng(np.random.SeedSequence(keys))
