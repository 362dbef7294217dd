"""Memoised spherical-function tables, optionally persisted under SPHC_CACHE_DIR."""

from __future__ import annotations

import hashlib
import os
from pathlib import Path

import numpy as np

CACHE_ENV = "SPHC_CACHE_DIR"


def content_key(d: int, lam_nodes: np.ndarray, r_nodes: np.ndarray, tag: str = "phi") -> str:
    h = hashlib.sha256()
    h.update(f"{tag}:{d}:".encode())
    h.update(np.ascontiguousarray(lam_nodes, dtype=np.float64).tobytes())
    h.update(b"|")
    h.update(np.ascontiguousarray(r_nodes, dtype=np.float64).tobytes())
    return h.hexdigest()


class TableCache:
    """Tables keyed by (d, lambda nodes, r nodes) content hash.

    Memory first, then ``<dir>/<hash>.npy`` when a directory is configured.
    Disk round-trips are bit-exact since arrays are stored raw.
    """

    def __init__(self, directory: str | os.PathLike | None = None, use_env: bool = True):
        if directory is None and use_env:
            directory = os.environ.get(CACHE_ENV) or None
        self.directory = Path(directory) if directory else None
        self._mem: dict[str, np.ndarray] = {}
        self.hits = 0
        self.misses = 0

    def get(self, key: str, build):
        if key in self._mem:
            self.hits += 1
            return self._mem[key]
        if self.directory is not None:
            path = self.directory / f"{key}.npy"
            if path.exists():
                arr = np.load(path)
                arr.setflags(write=False)
                self._mem[key] = arr
                self.hits += 1
                return arr
        self.misses += 1
        arr = np.asarray(build())
        arr.setflags(write=False)
        self._mem[key] = arr
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            tmp = self.directory / f"{key}.tmp.npy"
            np.save(tmp, arr)
            os.replace(tmp, self.directory / f"{key}.npy")
        return arr

    def clear(self) -> None:
        self._mem.clear()


_default: TableCache | None = None


def default_cache() -> TableCache:
    global _default
    env = os.environ.get(CACHE_ENV) or None
    if _default is None or (str(_default.directory) if _default.directory else None) != env:
        _default = TableCache(env)
    return _default


def set_default_cache(cache: TableCache | None) -> None:
    global _default
    _default = cache
