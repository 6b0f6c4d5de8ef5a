"""Exact Cayley balls K^n by layered breadth-first search, plus caching.

Elements of a :class:`BallTable` are stored sorted by word length and then
lexicographically, so the ball of radius n is the prefix ``elements[:mu[n]]``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import BudgetExceeded, CacheCorrupt, CacheMismatch, ShapeError

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 20_000_000
CACHE_VERSION = 1
_MAGIC = b"NEGDEF-BALLS\n"
_KEY_LIMIT = 1 << 62


class Packer:
    """Mixed-radix map from bounded integer rows to int64 keys.

    Key order equals lexicographic row order. Rows outside the bounds map
    to -1, which is never a valid key.
    """

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=np.int64)
        self.hi = np.asarray(hi, dtype=np.int64)
        base = (self.hi - self.lo + 1).tolist()
        total = 1
        for b in base:
            total *= int(b)
        if total >= _KEY_LIMIT:
            raise OverflowError(f"coordinate ranges {base} do not fit a 62-bit key")
        strides = []
        acc = 1
        for b in reversed(base):
            strides.append(acc)
            acc *= int(b)
        self.strides = np.array(strides[::-1], dtype=np.int64)
        self.base = np.array(base, dtype=np.int64)

    @classmethod
    def covering(cls, *arrays, dim):
        rows = [a for a in arrays if len(a)]
        if not rows:
            return cls(np.zeros(dim, np.int64), np.zeros(dim, np.int64))
        lo = np.min([a.min(axis=0) for a in rows], axis=0)
        hi = np.max([a.max(axis=0) for a in rows], axis=0)
        return cls(lo, hi)

    def pack(self, X):
        X = np.asarray(X, dtype=np.int64)
        if X.shape[-1] == 0:
            return np.zeros(X.shape[:-1], dtype=np.int64)
        inside = np.all((X >= self.lo) & (X <= self.hi), axis=-1)
        keys = ((X - self.lo) * self.strides).sum(axis=-1)
        return np.where(inside, keys, -1)

    def unpack(self, keys):
        keys = np.asarray(keys, dtype=np.int64)
        out = np.empty(keys.shape + (len(self.base),), dtype=np.int64)
        rem = keys.copy()
        for i, s in enumerate(self.strides):
            out[..., i] = rem // s + self.lo[i]
            rem = rem % s
        return out


@dataclass
class Fibers:
    """Ball B_k split along the central coordinate (see kernels module)."""

    q_rows: np.ndarray  # (P, dim) representatives (q_j, 0)
    q_keys: np.ndarray  # (P,) sorted keys of q_j
    run_ptr: np.ndarray
    run_lo: np.ndarray
    run_hi: np.ndarray


class BallTable:
    """Exact balls of radius 0..R; immutable once built."""

    def __init__(self, group, radius, mu, elements):
        self.group = group
        self.radius = int(radius)
        self.mu = [int(m) for m in mu]
        self.elements = np.ascontiguousarray(elements, dtype=np.int64).reshape(-1, group.dim)
        if len(self.mu) != self.radius + 1 or self.mu[-1] != len(self.elements):
            raise ShapeError("mu does not match the element array")
        layer_sizes = np.diff([0] + self.mu)
        self.lengths = np.repeat(np.arange(self.radius + 1, dtype=np.int64), layer_sizes)
        self.packer = Packer.covering(self.elements, dim=group.dim)
        keys = self.packer.pack(self.elements)
        order = np.argsort(keys, kind="stable")
        self.sorted_keys = keys[order]
        self.sorted_index = order.astype(np.int64)
        self.sorted_lengths = self.lengths[order]
        self._fibers = {}
        self._overlap_fields = {}
        self._omega_memo = {}
        self._q_packer = Packer(
            np.delete(self.packer.lo, group.central), np.delete(self.packer.hi, group.central)
        )

    def __eq__(self, other):
        return (
            isinstance(other, BallTable)
            and self.group.group_hash == other.group.group_hash
            and self.mu == other.mu
            and np.array_equal(self.elements, other.elements)
        )

    def ball(self, n):
        return self.elements[: self.mu[n]]

    def index_of(self, X):
        """Table row of each element of X (an (m, dim) array), or -1."""
        X = np.asarray(X, dtype=np.int64).reshape(-1, self.group.dim)
        keys = self.packer.pack(X)
        pos = np.searchsorted(self.sorted_keys, keys)
        pos = np.minimum(pos, len(self.sorted_keys) - 1)
        found = (self.sorted_keys[pos] == keys) & (keys >= 0)
        return np.where(found, self.sorted_index[pos], -1)

    def word_length(self, s):
        """Exact word length of ``s``, or None if it lies beyond the horizon."""
        if len(s) != self.group.dim:
            raise ShapeError(f"element {tuple(s)} has {len(s)} coordinates, expected {self.group.dim}")
        idx = int(self.index_of([s])[0])
        return None if idx < 0 else int(self.lengths[idx])

    def contains(self, s, n):
        wl = self.word_length(s)
        return wl is not None and wl <= n

    @cached_property
    def content_hash(self):
        """sha256 over the sorted canonical encodings (little-endian int64)."""
        data = self.elements[self.sorted_index].astype("<i8").tobytes()
        return hashlib.sha256(data).hexdigest()

    def q_keys(self, X):
        return self._q_packer.pack(np.delete(np.asarray(X, dtype=np.int64), self.group.central, axis=-1))

    def fibers(self, k):
        if k in self._fibers:
            return self._fibers[k]
        c = self.group.central
        B = self.ball(k)
        qk = self.q_keys(B)
        z = B[:, c]
        order = np.lexsort((z, qk))
        qk, z, B = qk[order], z[order], B[order]
        new_q = np.ones(len(qk), dtype=bool)
        new_q[1:] = qk[1:] != qk[:-1]
        new_run = new_q.copy()
        new_run[1:] |= z[1:] != z[:-1] + 1
        run_start = np.flatnonzero(new_run)
        run_end = np.append(run_start[1:], len(z)) - 1
        q_start = np.flatnonzero(new_q)
        run_ptr = np.searchsorted(run_start, q_start).astype(np.int64)
        run_ptr = np.append(run_ptr, len(run_start))
        q_rows = B[q_start].copy()
        q_rows[:, c] = 0
        fib = Fibers(q_rows, qk[q_start], run_ptr, z[run_start].copy(), z[run_end].copy())
        self._fibers[k] = fib
        return fib


def _expand(group, frontier, threads):
    gens = group.generator_array
    if threads <= 1 or len(frontier) < 4096:
        return np.concatenate([group.mul_many(frontier, g[None, :]) for g in gens])
    chunks = np.array_split(frontier, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = pool.map(
            lambda ch: np.concatenate([group.mul_many(ch, g[None, :]) for g in gens]), chunks
        )
        return np.concatenate(list(parts))


def enumerate_balls(group, radius, budget=DEFAULT_BUDGET, threads=1):
    """Balls K^0..K^R of ``group`` by breadth-first layers.

    Layer n is (layer n-1) K minus layers n-1 and n-2; the generating set is
    symmetric, so no neighbour of layer n-1 lies deeper inside the ball.
    Output is sorted, hence identical for every ``threads`` value.
    """
    if radius < 1:
        raise ValueError("radius must be at least 1")
    dim = group.dim
    identity = np.zeros((1, dim), dtype=np.int64)
    layers = [identity]
    mu = [1]
    prev = np.zeros((0, dim), dtype=np.int64)
    cur = identity
    for n in range(1, radius + 1):
        cand = _expand(group, cur, threads)
        packer = Packer.covering(cand, cur, prev, dim=dim)
        keys = np.unique(packer.pack(cand))
        old = np.concatenate([packer.pack(cur), packer.pack(prev)])
        keys = keys[~np.isin(keys, old, assume_unique=False)]
        if mu[-1] + len(keys) > budget:
            raise BudgetExceeded(
                f"ball of radius {n} exceeds the budget of {budget} elements", radius_reached=n - 1
            )
        prev, cur = cur, packer.unpack(keys)
        layers.append(cur)
        mu.append(mu[-1] + len(cur))
    log.debug("enumerated %d elements up to radius %d", mu[-1], radius)
    return BallTable(group, radius, mu, np.concatenate(layers))


def save_table(table, path):
    path = Path(path)
    body = table.elements.astype("<i8").tobytes()
    header = {
        "format_version": CACHE_VERSION,
        "group_hash": table.group.group_hash,
        "radius": table.radius,
        "dim": table.group.dim,
        "mu": table.mu,
        "body_sha256": hashlib.sha256(body).hexdigest(),
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(body)
    tmp.replace(path)
    return path


def load_table(path, group):
    raw = Path(path).read_bytes()
    if not raw.startswith(_MAGIC):
        raise CacheCorrupt(f"{path}: not a ball cache file")
    rest = raw[len(_MAGIC) :]
    nl = rest.find(b"\n")
    if nl < 0:
        raise CacheCorrupt(f"{path}: truncated header")
    try:
        header = json.loads(rest[:nl])
        mu = [int(m) for m in header["mu"]]
        radius = int(header["radius"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CacheCorrupt(f"{path}: unreadable header ({exc})") from None
    if header.get("format_version") != CACHE_VERSION:
        raise CacheMismatch(f"{path}: cache format {header.get('format_version')}, expected {CACHE_VERSION}")
    if header.get("group_hash") != group.group_hash or header.get("dim") != group.dim:
        raise CacheMismatch(f"{path}: cache was built for a different group")
    body = rest[nl + 1 :]
    if len(body) != mu[-1] * group.dim * 8 or hashlib.sha256(body).hexdigest() != header.get("body_sha256"):
        raise CacheCorrupt(f"{path}: body is truncated or damaged")
    elements = np.frombuffer(body, dtype="<i8").astype(np.int64).reshape(-1, group.dim)
    return BallTable(group, radius, mu, elements)


def cache_roundtrip(table, path):
    save_table(table, path)
    return load_table(path, table.group)


def cached_tables(group, radius, cache_dir=None, budget=DEFAULT_BUDGET, threads=1):
    """Load the table from ``cache_dir`` if present, otherwise build and store it."""
    if cache_dir is None:
        return enumerate_balls(group, radius, budget=budget, threads=threads)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"{group.group_hash[:16]}_R{radius}.balls"
    if path.exists():
        try:
            return load_table(path, group)
        except (CacheCorrupt, CacheMismatch) as exc:
            log.warning("ignoring cache: %s", exc)
    table = enumerate_balls(group, radius, budget=budget, threads=threads)
    save_table(table, path)
    return table


def write_balls_csv(table, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "mu_n"])
        for n, m in enumerate(table.mu):
            w.writerow([n, m])
