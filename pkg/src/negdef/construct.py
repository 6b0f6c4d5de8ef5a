"""Truncated negative definite length functions built from ball overlaps.

For every selected index n (those outside F_{beta,gamma}) a radius k(n) in
[n^gamma, (n+1)^gamma] avoiding E_beta is fixed, and

    omega_k(s) = |s B_k ∩ B_k| / |B_k|,        l_N(s) = sum_{n <= N, n not in F} (1 - omega_{k(n)}(s)).

Each omega_k is the Gram function of the normalized indicator of B_k, so
l_N is conditionally negative definite for every depth N. Values are exact
rationals; the remainder of the infinite series is bounded separately.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import EmptyCombination, HorizonError, TargetTooTight
from .exact import floor_pow
from .group_core import format_element
from .growth import alpha_sequence, check_params, classify_indices, interval_integers

log = logging.getLogger(__name__)

# Cap on (groups x fibers x dim) entries materialized per kernel call.
_PAIR_BLOCK = 4_000_000


@dataclass(frozen=True)
class ConstructionParams:
    beta: float
    gamma: float
    N: int
    d_target: float | None = None

    def __post_init__(self):
        check_params(self.beta, self.gamma)
        if self.N < 0:
            raise ValueError("depth N must be non-negative")


@dataclass(frozen=True)
class LengthValue:
    value: Fraction
    tail_bound: float
    word_length: int


def select_parameters(d_target, fit):
    """(beta, gamma) aiming at sublevel growth exponent ``d_target``."""
    if d_target <= fit.d_hat:
        raise TargetTooTight(f"d_target={d_target} is not above the fitted exponent {fit.d_hat:.4f}")
    eps = max(0.05, fit.residual)
    gamma = d_target / (fit.d_hat + eps)
    if gamma <= 1.02:
        raise TargetTooTight(f"gamma={gamma:.4f} is too close to 1 for d_target={d_target}")
    beta = (1 / gamma + 1) / 2
    return beta, gamma


def select_k(flags_E, flags_F, gamma, n):
    """Smallest k in [n^gamma, (n+1)^gamma] outside E, or None if n is in F."""
    lo, hi = interval_integers(n, gamma)
    if hi >= len(flags_E):
        raise HorizonError(f"selecting k({n}) needs E flags up to {hi}", hi)
    for k in range(lo, hi + 1):
        if not flags_E[k]:
            return k
    if n < len(flags_F):
        assert flags_F[n], f"n={n} has no admissible k but is not flagged in F"
    return None


# -- overlap counts ---------------------------------------------------------


def _overlap_direct(table, k, s):
    B = table.ball(k)
    prod = table.group.mul_many(np.asarray(s, dtype=np.int64)[None, :], B)
    keys = table.packer.pack(prod)
    return kernels.count_in_ball(table.sorted_keys, table.sorted_lengths, keys, k)


def overlap_counts(table, k, targets):
    """|s B_k ∩ B_k| for each table row in ``targets``, via the fiber kernel."""
    targets = np.asarray(targets, dtype=np.int64)
    out = np.zeros(len(targets), dtype=np.int64)
    if len(targets) == 0:
        return out
    group = table.group
    c = group.central
    fib = table.fibers(k)
    P = len(fib.q_keys)
    T = table.elements[targets]
    tq = table.q_keys(T)
    uq, first, inverse = np.unique(tq, return_index=True, return_inverse=True)
    Qg = T[first].copy()
    Qg[:, c] = 0
    block = max(1, _PAIR_BLOCK // max(1, P * group.dim))
    for a in range(0, len(uq), block):
        b = min(a + block, len(uq))
        prod = group.mul_many(Qg[a:b, None, :], fib.q_rows[None, :, :])
        phi = np.ascontiguousarray(prod[..., c])
        pk = table.q_keys(prod)
        pos = np.searchsorted(fib.q_keys, pk)
        pos = np.minimum(pos, P - 1)
        pair_fiber = np.where((fib.q_keys[pos] == pk) & (pk >= 0), pos, -1).astype(np.int64)
        sel = np.flatnonzero((inverse >= a) & (inverse < b))
        t_group = (inverse[sel] - a).astype(np.int64)
        t_c = np.ascontiguousarray(T[sel, c])
        out[sel] = kernels.fiber_overlaps(
            fib.run_ptr, fib.run_lo, fib.run_hi, pair_fiber, phi, t_group, t_c
        )
    return out


def _overlap_field(table, k, upto, exhaustive=False):
    """Counts over table rows of word length <= ``upto``, memoized per k.

    Without ``exhaustive`` rows longer than 2k are set to zero directly:
    s B_k meets B_k only if s lies in B_k B_k^-1 = B_2k.
    """
    cache = table._overlap_fields
    key = (k, exhaustive)
    if key in cache and cache[key][0] >= upto:
        return cache[key][1][: table.mu[upto]]
    stop = upto if exhaustive else min(upto, 2 * k)
    counts = np.zeros(table.mu[upto], dtype=np.int64)
    counts[: table.mu[stop]] = overlap_counts(table, k, np.arange(table.mu[stop]))
    cache[key] = (upto, counts)
    return counts


def omega(table, k, s):
    """Exact omega_k(s) = |s B_k ∩ B_k| / |B_k| by direct membership tests."""
    if table.radius < k:
        raise HorizonError(f"omega_{k} needs the ball of radius {k}", k)
    s = tuple(int(v) for v in s)
    memo = table._omega_memo
    hit = memo.get((k, s))
    if hit is not None:
        return hit
    wl = table.word_length(s)
    if (wl is not None and wl > 2 * k) or (wl is None and table.radius >= 2 * k):
        num = 0
    else:
        num = _overlap_direct(table, k, s)
    val = Fraction(num, table.mu[k])
    memo[(k, s)] = val
    memo[(k, table.group.inverse(s))] = val
    return val


# -- length function --------------------------------------------------------


def tail_bound(p, a, N):
    """Upper bound on sum_{n > N} min(1, p n^-a), a = beta*gamma > 1."""
    if p == 0:
        return 0.0
    M = max(N, math.ceil(p ** (1 / a)), 1)
    val = (M - N) + p * M ** (1 - a) / (a - 1)
    return val * (1 + 1e-12)


@dataclass
class LengthContext:
    params: ConstructionParams
    table: object
    alpha: list
    flags_E: np.ndarray
    flags_F: np.ndarray
    k_sel: dict
    skipped: list
    required_radius: int
    _float_cache: dict = field(default_factory=dict, repr=False)

    @property
    def terms(self):
        return [self.k_sel[n] for n in sorted(self.k_sel)]

    @property
    def n_terms(self):
        return len(self.k_sel)

    def term_counts(self, upto, exhaustive=False):
        return [(k, _overlap_field(self.table, k, upto, exhaustive)) for k in self.terms]

    def ell_float(self, upto, exhaustive=False):
        """Float l_N over table rows of word length <= upto."""
        key = (upto, exhaustive)
        if key not in self._float_cache:
            acc = np.zeros(self.table.mu[upto], dtype=float)
            for k, counts in self.term_counts(upto, exhaustive):
                mu = self.table.mu[k]
                acc += (mu - counts) / mu
            self._float_cache[key] = acc
        return self._float_cache[key]

    def ell_exact_rows(self, rows, upto, exhaustive=False):
        """Exact l_N at the given table rows (all of word length <= upto)."""
        fields = self.term_counts(upto, exhaustive)
        out = []
        for r in rows:
            v = Fraction(0)
            for k, counts in fields:
                mu = self.table.mu[k]
                v += Fraction(mu - int(counts[r]), mu)
            out.append(v)
        return out

    def ell(self, s):
        return ell(self, s)


def build_context(table, params):
    """Select k(n) for n = 1..N and package the evaluation machinery."""
    alpha = alpha_sequence(table)
    flags_E, flags_F = classify_indices(alpha, params.beta, params.gamma, params.N)
    k_sel = {}
    skipped = []
    for n in range(1, params.N + 1):
        k = select_k(flags_E, flags_F, params.gamma, n)
        if k is None:
            skipped.append(n)
        else:
            k_sel[n] = k
    kmax = max(k_sel.values(), default=0)
    if kmax > table.radius:  # pragma: no cover - classify_indices already checks
        raise HorizonError(f"k(n) up to {kmax} exceeds the table", kmax)
    return LengthContext(params, table, alpha, flags_E, flags_F, k_sel, skipped, 2 * kmax)


def ell(ctx, s):
    """Exact truncated l_N(s) with a bound on the neglected tail."""
    table = ctx.table
    p = table.word_length(s)
    if p is None:
        raise HorizonError(f"element {format_element(s)} lies beyond the table", table.radius + 1)
    value = Fraction(0)
    for k in ctx.terms:
        value += 1 - omega(table, k, s)
    a = ctx.params.beta * ctx.params.gamma
    return LengthValue(value, tail_bound(p, a, ctx.params.N), p)


def combined_ell(ctxs, s):
    """sum_m 2^-m l^(m)(s) / sigma_m with sigma_m = max of l^(m) on generators."""
    if not ctxs:
        raise EmptyCombination("no contexts to combine")
    total = Fraction(0)
    for m, ctx in enumerate(ctxs, start=1):
        sigma = max(ell(ctx, g).value for g in ctx.table.group.generators)
        if sigma == 0:
            log.warning("context %d vanishes on the generators; dropping its term", m)
            continue
        total += Fraction(1, 2**m) * ell(ctx, s).value / sigma
    return total


def combination_contexts(table, fit, N, M=4):
    """Contexts for d_m = d_hat (1 + 2^-m), m = 1..M; infeasible targets are skipped."""
    out = []
    for m in range(1, M + 1):
        d_m = fit.d_hat * (1 + 2.0**-m)
        try:
            beta, gamma = select_parameters(d_m, fit)
        except TargetTooTight as exc:
            log.warning("combination term m=%d skipped: %s", m, exc)
            continue
        n_max = N
        while n_max > 0 and floor_pow(n_max + 1, gamma) > table.radius:
            n_max -= 1
        out.append(build_context(table, ConstructionParams(beta, gamma, n_max, d_m)))
    return out


def properness_threshold(ctx):
    """(2m, bound) with m = floor((N+1)^gamma) + 1 and bound = #([1,N] \\ F)."""
    m = floor_pow(ctx.params.N + 1, ctx.params.gamma) + 1
    return 2 * m, ctx.n_terms


def evaluation_rows(table, p_max, sample_size, rng):
    """All rows of word length <= p_max plus a seeded sample of the rest."""
    p_max = min(p_max, table.radius)
    head = list(range(table.mu[p_max]))
    rest = len(table.elements) - len(head)
    picks = rng.sample_indices(rest, sample_size) if rest > 0 else []
    return head + [len(head) + i for i in picks]


def write_ell_csv(ctx, rows, path):
    table = ctx.table
    a = ctx.params.beta * ctx.params.gamma
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["element", "word_length", "ell_num", "ell_den", "tail_bound", "n_terms"])
        values = ctx.ell_exact_rows(rows, table.radius)
        for r, v in zip(rows, values):
            s = tuple(int(x) for x in table.elements[r])
            p = int(table.lengths[r])
            w.writerow(
                [format_element(s), p, v.numerator, v.denominator, repr(tail_bound(p, a, ctx.params.N)), ctx.n_terms]
            )
