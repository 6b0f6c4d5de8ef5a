"""Finitely generated groups with integer-tuple element encodings.

Supported families:

* ``FreeAbelian(rank)``: Z^r, coordinates added componentwise.
* ``Heisenberg3()``: triples (a, b, c) for the matrix
  [[1, a, c], [0, 1, b], [0, 0, 1]], so that
  (a, b, c)(a', b', c') = (a + a', b + b', c + c' + a b').
* ``Unitriangular(size)``: strictly-upper entries of a size x size upper
  unitriangular integer matrix, row-major.
* ``DirectProduct(factors)``: concatenated encodings.

Every family has a *central coordinate* z: an index whose value is additive
up to a cocycle of the other coordinates, (q, z)(q', z') = (q q', z + z' +
phi(q, q')), while the remaining coordinates q q' never depend on z. The
fiber kernels in :mod:`negdef.kernels` exploit this to count ball overlaps
one fiber at a time.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import EmptySpec, InvalidGenerator, ShapeError

# Guard for int64 arithmetic: any intermediate value must stay below this.
_SAFE = 1 << 62


@dataclass(frozen=True)
class FreeAbelian:
    rank: int
    generators: tuple | None = None

    def to_dict(self):
        d = {"kind": "free_abelian", "rank": self.rank}
        if self.generators is not None:
            d["generators"] = [list(g) for g in self.generators]
        return d


@dataclass(frozen=True)
class Heisenberg3:
    generators: tuple | None = None

    def to_dict(self):
        d = {"kind": "heisenberg3"}
        if self.generators is not None:
            d["generators"] = [list(g) for g in self.generators]
        return d


@dataclass(frozen=True)
class Unitriangular:
    """Generators may be given as size x size matrices or as encodings."""

    size: int
    generators: tuple | None = None

    def to_dict(self):
        d = {"kind": "unitriangular", "size": self.size}
        if self.generators is not None:
            d["generators"] = [_jsonable(g) for g in self.generators]
        return d


@dataclass(frozen=True)
class DirectProduct:
    factors: tuple = field(default_factory=tuple)

    def to_dict(self):
        return {"kind": "direct_product", "factors": [f.to_dict() for f in self.factors]}


GroupSpec = FreeAbelian | Heisenberg3 | Unitriangular | DirectProduct


def _jsonable(g):
    if isinstance(g, (list, tuple)):
        return [_jsonable(x) for x in g]
    return int(g)


def _freeze(g):
    if isinstance(g, (list, tuple)):
        return tuple(_freeze(x) for x in g)
    return int(g)


def spec_from_dict(d):
    """Build a GroupSpec from its plain-dict form (as in config files)."""
    d = dict(d)
    kind = d.pop("kind", None)
    gens = d.pop("generators", None)
    gens = _freeze(gens) if gens is not None else None
    try:
        if kind == "free_abelian":
            spec = FreeAbelian(int(d.pop("rank")), gens)
        elif kind == "heisenberg3":
            spec = Heisenberg3(gens)
        elif kind == "unitriangular":
            spec = Unitriangular(int(d.pop("size")), gens)
        elif kind == "direct_product":
            spec = DirectProduct(tuple(spec_from_dict(f) for f in d.pop("factors")))
        else:
            raise InvalidGenerator(f"unknown group kind {kind!r}")
    except KeyError as exc:
        raise InvalidGenerator(f"group kind {kind!r} is missing field {exc}") from None
    if d:
        raise InvalidGenerator(f"unknown group fields {sorted(d)} for kind {kind!r}")
    return spec


def format_element(x):
    """Text form used in reports, e.g. ``(1,-1,0)``."""
    return "(" + ",".join(str(int(v)) for v in x) + ")"


class _Law:
    """Vectorized group law of one family on (n, dim) int64 arrays."""

    dim: int
    central: int

    def mul(self, A, B):
        raise NotImplementedError

    def inv(self, A):
        raise NotImplementedError

    def bound(self, ma, mb):
        """Upper bound on |entries| of a product given input bounds."""
        raise NotImplementedError


class _AbelianLaw(_Law):
    def __init__(self, rank):
        self.dim = rank
        self.central = rank - 1

    def mul(self, A, B):
        return A + B

    def inv(self, A):
        return -A

    def bound(self, ma, mb):
        return ma + mb


class _HeisenbergLaw(_Law):
    dim = 3
    central = 2

    def mul(self, A, B):
        out = A + B
        out[..., 2] = out[..., 2] + A[..., 0] * B[..., 1]
        return out

    def inv(self, A):
        out = -A
        out[..., 2] = out[..., 2] + A[..., 0] * A[..., 1]
        return out

    def bound(self, ma, mb):
        return ma + mb + ma * mb


class _UnitriangularLaw(_Law):
    def __init__(self, size):
        self.size = size
        self.dim = size * (size - 1) // 2
        self.central = size - 2  # entry (0, size-1) in row-major order
        self.rows, self.cols = np.triu_indices(size, 1)

    def to_matrix(self, A):
        M = np.zeros(A.shape[:-1] + (self.size, self.size), dtype=A.dtype)
        M[..., self.rows, self.cols] = A
        idx = np.arange(self.size)
        M[..., idx, idx] = 1
        return M

    def from_matrix(self, M):
        return np.ascontiguousarray(M[..., self.rows, self.cols])

    def mul(self, A, B):
        return self.from_matrix(np.matmul(self.to_matrix(A), self.to_matrix(B)))

    def inv(self, A):
        # (I + N)^-1 = I - N + N^2 - ... with N nilpotent of order size.
        M = self.to_matrix(A)
        eye = np.broadcast_to(np.eye(self.size, dtype=np.int64).astype(A.dtype), M.shape)
        N = M - eye
        out = eye.copy()
        term = eye.copy()
        for _ in range(self.size - 1):
            term = -np.matmul(term, N)
            out = out + term
        return self.from_matrix(out)

    def bound(self, ma, mb):
        return self.size * (ma + 1) * (mb + 1)


class _ProductLaw(_Law):
    def __init__(self, laws):
        self.laws = laws
        self.offsets = np.cumsum([0] + [law.dim for law in laws]).tolist()
        self.dim = self.offsets[-1]
        self.central = self.offsets[-2] + laws[-1].central

    def _split(self, A):
        return [A[..., a:b] for a, b in zip(self.offsets[:-1], self.offsets[1:])]

    def mul(self, A, B):
        parts = [law.mul(a, b) for law, a, b in zip(self.laws, self._split(A), self._split(B))]
        return np.concatenate(parts, axis=-1)

    def inv(self, A):
        return np.concatenate([law.inv(a) for law, a in zip(self.laws, self._split(A))], axis=-1)

    def bound(self, ma, mb):
        return max(law.bound(ma, mb) for law in self.laws)


def _law_for(spec):
    if isinstance(spec, FreeAbelian):
        if spec.rank < 1:
            raise EmptySpec("FreeAbelian rank must be positive")
        return _AbelianLaw(spec.rank)
    if isinstance(spec, Heisenberg3):
        return _HeisenbergLaw()
    if isinstance(spec, Unitriangular):
        if spec.size < 3:
            raise InvalidGenerator("Unitriangular size must be at least 3")
        return _UnitriangularLaw(spec.size)
    if isinstance(spec, DirectProduct):
        if not spec.factors:
            raise EmptySpec("DirectProduct needs at least one factor")
        return _ProductLaw([_law_for(f) for f in spec.factors])
    raise InvalidGenerator(f"unsupported group spec {spec!r}")


def _default_generators(spec, law):
    if isinstance(spec, FreeAbelian):
        return [tuple(int(i == j) for j in range(spec.rank)) for i in range(spec.rank)]
    if isinstance(spec, Heisenberg3):
        return [(1, 0, 0), (0, 1, 0)]
    if isinstance(spec, Unitriangular):
        gens = []
        for i in range(spec.size - 1):
            M = np.eye(spec.size, dtype=np.int64)
            M[i, i + 1] = 1
            gens.append(tuple(law.from_matrix(M).tolist()))
        return gens
    # DirectProduct: each factor's generators embedded with identity elsewhere.
    gens = []
    for f, flaw, off in zip(spec.factors, law.laws, law.offsets):
        for g in _explicit_generators(f, flaw):
            full = [0] * law.dim
            full[off : off + flaw.dim] = g
            gens.append(tuple(full))
    return gens


def _explicit_generators(spec, law):
    if isinstance(spec, DirectProduct):
        return _default_generators(spec, law)
    if spec.generators is None:
        return _default_generators(spec, law)
    if len(spec.generators) == 0:
        raise EmptySpec("explicit generator list is empty")
    out = []
    for g in spec.generators:
        out.append(_encode_generator(spec, law, g))
    return out


def _encode_generator(spec, law, g):
    arr = np.asarray(g)
    if not np.issubdtype(arr.dtype, np.integer):
        raise InvalidGenerator(f"generator {g!r} has non-integer entries")
    if isinstance(spec, Unitriangular) and arr.ndim == 2:
        m = spec.size
        if arr.shape != (m, m):
            raise InvalidGenerator(f"generator matrix must be {m}x{m}, got {arr.shape}")
        if np.any(np.tril(arr, -1) != 0) or np.any(np.diag(arr) != 1):
            raise InvalidGenerator(f"generator matrix {arr.tolist()} is not upper unitriangular")
        return tuple(int(v) for v in law.from_matrix(arr.astype(np.int64)))
    if arr.ndim != 1 or arr.shape[0] != law.dim:
        raise InvalidGenerator(f"generator {g!r} must have {law.dim} coordinates")
    return tuple(int(v) for v in arr)


class Group:
    """Immutable handle: group law plus symmetrized generating set with identity."""

    def __init__(self, spec):
        self.spec = spec
        self._law = _law_for(spec)
        self.dim = self._law.dim
        self.central = self._law.central
        self.identity = (0,) * self.dim
        gens = _explicit_generators(spec, self._law)
        seen = {self.identity: None}
        for g in gens:
            seen.setdefault(g, None)
            seen.setdefault(self.inverse(g), None)
        # Identity first, then the rest in lexicographic order.
        rest = sorted(k for k in seen if k != self.identity)
        self.generators = (self.identity,) + tuple(rest)
        self.generator_array = np.array(self.generators, dtype=np.int64).reshape(-1, self.dim)

    def __repr__(self):
        return f"Group({self.spec!r}, {len(self.generators)} generators)"

    @cached_property
    def group_hash(self):
        payload = json.dumps(
            {"spec": self.spec.to_dict(), "generators": [list(g) for g in self.generators]},
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).hexdigest()

    def _check(self, a):
        if len(a) != self.dim:
            raise ShapeError(f"element {tuple(a)} has {len(a)} coordinates, expected {self.dim}")

    def _check_bound(self, ma, mb):
        if self._law.bound(ma, mb) >= _SAFE:
            raise OverflowError(
                f"product of elements with entries up to {ma} and {mb} may exceed int64 range"
            )

    def multiply(self, a, b):
        self._check(a)
        self._check(b)
        # Python integers: exact, then range-checked on the way out.
        out = self._law.mul(np.array(a, dtype=object), np.array(b, dtype=object))
        return self._to_tuple(out)

    def inverse(self, a):
        self._check(a)
        return self._to_tuple(self._law.inv(np.array(a, dtype=object)))

    def _to_tuple(self, arr):
        out = tuple(int(v) for v in arr)
        if any(abs(v) >= _SAFE for v in out):
            raise OverflowError(f"element {out} exceeds the int64 working range")
        return out

    def mul_many(self, A, B):
        """Row-wise products of two broadcastable (..., dim) int64 arrays."""
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        if A.shape[-1] != self.dim or B.shape[-1] != self.dim:
            raise ShapeError(f"arrays must have last axis {self.dim}")
        ma = int(np.abs(A).max()) if A.size else 0
        mb = int(np.abs(B).max()) if B.size else 0
        self._check_bound(ma, mb)
        return self._law.mul(A, B)

    def inv_many(self, A):
        A = np.asarray(A, dtype=np.int64)
        if A.shape[-1] != self.dim:
            raise ShapeError(f"array must have last axis {self.dim}")
        m = int(np.abs(A).max()) if A.size else 0
        self._check_bound(m, m)
        return self._law.inv(A)


def make_group(spec):
    return Group(spec)
