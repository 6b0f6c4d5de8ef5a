"""Checks of positive/negative definiteness, lemma bounds and sublevel growth."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .construct import _overlap_field, omega, properness_threshold
from .errors import HorizonError, InsufficientCertifiedPoints, NotSymmetric
from .exact import compare_pow, pow_upper
from .group_core import format_element
from .rng import zero_sum_vector

PSD_TOL = 1e-9
# Margin below which float sublevel comparisons are re-done exactly.
_TIE = 1e-9


@dataclass
class PsdReport:
    size: int
    min_eigenvalue: float
    scale: float
    tol: float = PSD_TOL

    @property
    def passed(self):
        return self.min_eigenvalue >= -self.tol * self.scale

    def to_dict(self):
        return {
            "size": self.size,
            "min_eigenvalue": self.min_eigenvalue,
            "scale": self.scale,
            "pass": self.passed,
        }


@dataclass
class CndReport:
    sample: list
    exact_forms: list
    matrix: PsdReport
    schoenberg: dict
    seed: int

    @property
    def passed(self):
        return (
            all(q <= 0 for q in self.exact_forms)
            and self.matrix.passed
            and all(r.passed for r in self.schoenberg.values())
        )

    def to_dict(self):
        worst = max(self.exact_forms, default=Fraction(0))
        return {
            "sample_size": len(self.sample),
            "trials": len(self.exact_forms),
            "max_exact_form": str(worst),
            "exact_pass": all(q <= 0 for q in self.exact_forms),
            "matrix": self.matrix.to_dict(),
            "schoenberg": {repr(t): r.to_dict() for t, r in sorted(self.schoenberg.items())},
            "seed": self.seed,
            "pass": self.passed,
        }


@dataclass
class LemmaReport:
    checked: int = 0
    generator_violations: list = field(default_factory=list)
    statement_violations: list = field(default_factory=list)
    literal_violations: list = field(default_factory=list)
    corrected_violations: list = field(default_factory=list)

    @property
    def passed(self):
        """Generator bound plus the linear decay bound, both provable."""
        return not (self.generator_violations or self.statement_violations)

    @property
    def literal_passed(self):
        return self.passed and not self.literal_violations

    def to_dict(self):
        return {
            "checked": self.checked,
            "generator_violations": len(self.generator_violations),
            "linear_bound_violations": len(self.statement_violations),
            "min_linear_quadratic_violations": len(self.literal_violations),
            "quadratic_corrected_violations": len(self.corrected_violations),
            "first_violation": [list(map(str, v)) for v in self.literal_violations[:1]],
            "pass": self.passed,
        }


def min_eig_sym(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetric(f"matrix of shape {M.shape} is not square")
    if M.shape[0] > 256:
        raise ValueError("min_eig_sym handles matrices up to 256 x 256")
    scale = float(np.abs(M).max()) if M.size else 0.0
    if scale and float(np.abs(M - M.T).max()) > 1e-12 * scale:
        raise NotSymmetric("matrix is not symmetric")
    return float(np.linalg.eigvalsh((M + M.T) / 2)[0])


def _psd_report(M, tol=PSD_TOL):
    M = np.asarray(M, dtype=float)
    scale = float(np.abs(M).max()) if M.size else 0.0
    return PsdReport(len(M), min_eig_sym(M), scale, tol)


def _pair_rows(table, sample):
    """Table rows of s_i^-1 s_j for all pairs; HorizonError if any is missing."""
    group = table.group
    S = np.array(sample, dtype=np.int64).reshape(-1, group.dim)
    prods = group.mul_many(group.inv_many(S)[:, None, :], S[None, :, :])
    rows = table.index_of(prods.reshape(-1, group.dim)).reshape(len(S), len(S))
    if np.any(rows < 0):
        raise HorizonError("pairwise products leave the table", table.radius + 1)
    return rows


def check_positive_definite_omega(ctx, n, sample):
    """Gram test of omega_{k(n)} on ``sample``."""
    table = ctx.table
    k = ctx.k_sel[n]
    rows = _pair_rows(table, sample)
    M = np.empty(rows.shape)
    for i in range(rows.shape[0]):
        for j in range(rows.shape[1]):
            M[i, j] = float(omega(table, k, tuple(table.elements[rows[i, j]])))
    return _psd_report(M)


def ell_matrix_counts(ctx, rows):
    """Per-term integer overlap matrices at the given rows."""
    table = ctx.table
    upto = int(table.lengths[rows].max()) if rows.size else 0
    return [(table.mu[k], counts[rows]) for k, counts in ctx.term_counts(upto)]


def check_negative_definite_ell(ctx, sample, t_grid=(0.1, 1.0, 10.0), trials=25, rng=None, seed=0):
    table = ctx.table
    rows = _pair_rows(table, sample)
    terms = ell_matrix_counts(ctx, rows)
    m = len(sample)
    forms = []
    for _ in range(trials):
        c = np.array(zero_sum_vector(rng, m), dtype=np.int64)
        # sum_ij c_i c_j (1 - C_ij / mu) = -(c^T C c) / mu because sum c = 0.
        q = Fraction(0)
        for mu, C in terms:
            q -= Fraction(int(c @ C @ c), mu)
        forms.append(q)
    L = np.zeros((m, m))
    for mu, C in terms:
        L += (mu - C) / mu
    ell_s = _ell_at(ctx, sample)
    A = ell_s[:, None] + ell_s[None, :] - L
    matrix = _psd_report(A)
    schoenberg = {}
    for t in t_grid:
        E = np.exp(-t * L)
        schoenberg[t] = PsdReport(m, min_eig_sym(E), 1.0)
    return CndReport(list(sample), forms, matrix, schoenberg, seed)


def _ell_at(ctx, sample):
    table = ctx.table
    rows = table.index_of(np.array(sample, dtype=np.int64).reshape(-1, table.group.dim))
    if np.any(rows < 0):
        raise HorizonError("sample leaves the table", table.radius + 1)
    upto = int(table.lengths[rows].max())
    return ctx.ell_float(upto)[rows]


def lemma_bound(p, n, bg):
    """Certified-up floats (p n^-bg, p^2 n^-2bg, p^2 n^-bg)."""
    a = pow_upper(n, -bg)
    b = pow_upper(n, -2 * bg)
    up = lambda x: math.nextafter(x, math.inf) if x else 0.0  # noqa: E731
    return up(p * a), up(p * p * b), up(p * p * a)


def check_lemma_bounds(ctx, p_max, rng, sphere_cap=500):
    """Generator bound on K and the overlap decay bounds on spheres up to p_max.

    ``literal_violations`` records failures of 1 - omega <= min(p n^-bg,
    p^2 n^-2bg); ``statement_violations`` those of the linear bound alone and
    ``corrected_violations`` those of p^2 n^-bg.
    """
    table = ctx.table
    if p_max > table.radius:
        raise HorizonError(f"spheres up to radius {p_max}", p_max)
    bg = Fraction(ctx.params.beta) * Fraction(ctx.params.gamma)
    report = LemmaReport()
    for n, k in sorted(ctx.k_sel.items()):
        chain = Fraction(table.mu[k - 1], table.mu[k])
        for g in table.group.generators:
            w = omega(table, k, g)
            # omega >= mu(k-1)/mu(k) by containment, and 1 - omega <= k^-beta.
            if w < chain or compare_pow(1 - w, k, -Fraction(ctx.params.beta)) > 0:
                report.generator_violations.append((n, k, g, w))
    for p in range(p_max + 1):
        a, b = table.mu[p - 1] if p else 0, table.mu[p]
        rows = list(range(a, b))
        if len(rows) > sphere_cap:
            rows = [a + i for i in rng.sample_indices(len(rows), sphere_cap)]
        for n, k in sorted(ctx.k_sel.items()):
            counts = _overlap_field(table, k, p)
            lin, quad_lit, quad_fix = lemma_bound(p, n, bg)
            mu_k = table.mu[k]
            for r in rows:
                gap = Fraction(mu_k - int(counts[r]), mu_k)
                report.checked += 1
                if gap > lin:
                    report.statement_violations.append((n, p, r, gap))
                if gap > min(lin, quad_lit):
                    report.literal_violations.append((n, p, format_element(table.elements[r]), gap))
                if gap > min(1, quad_fix):
                    report.corrected_violations.append((n, p, r, gap))
    return report


def _count_leq(ctx, values, rows_upto, x):
    """#{rows : l_N <= x}, exact for values within the float tie margin."""
    below = values <= x - _TIE
    near = np.flatnonzero(np.abs(values - x) < _TIE)
    n = int(np.count_nonzero(below))
    if len(near):
        xf = Fraction(x)
        exact = ctx.ell_exact_rows(near, rows_upto)
        n += sum(1 for v in exact if v <= xf)
    return n


def sublevel_counts(ctx, xs):
    """[(x, count, certified)] for #{s : l_N(s) <= x}.

    With the table reaching radius 2m, every element outside B_2m has
    l_N = bound, so for x < bound the count over B_2m is the count over the
    whole group.
    """
    table = ctx.table
    radius, bound = properness_threshold(ctx)
    upto = min(radius, table.radius)
    values = ctx.ell_float(upto)
    out = []
    for x in xs:
        certified = table.radius >= radius and Fraction(x) < bound
        out.append((x, _count_leq(ctx, values, upto, x), bool(certified)))
    return out


def spectrum_grid(ctx):
    """Distinct exact values of l_N below the properness bound (the jump points)."""
    table = ctx.table
    radius, bound = properness_threshold(ctx)
    if table.radius < radius:
        raise HorizonError("certified spectrum needs the properness ball", radius)
    vals, first = np.unique(ctx.ell_float(radius), return_index=True)
    exact = ctx.ell_exact_rows(first[vals < bound + _TIE], radius)
    return sorted({v for v in exact if v < bound})


def fit_log_slope(pairs, what="points"):
    pts = [(x, n) for x, n, cert in pairs if cert and n >= 2 and x > 0]
    if len(pts) < 4:
        raise InsufficientCertifiedPoints(
            f"need at least 4 certified {what} with count >= 2 and x > 0, got {len(pts)}"
        )
    x = np.log([float(p[0]) for p in pts])
    y = np.log([p[1] for p in pts])
    if np.ptp(y) == 0:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def fit_sublevel_exponent(counts):
    return fit_log_slope(counts)


def properness_scan(ctx):
    """Elements between radius 2m and the horizon with l_N below the bound.

    Overlaps are counted exhaustively here (no use of the support bound), so
    the scan is an independent check of the properness inequality.
    """
    table = ctx.table
    radius, bound = properness_threshold(ctx)
    if table.radius < radius:
        raise HorizonError("properness scan needs the ball of radius 2m", radius)
    start = table.mu[radius]
    values = ctx.ell_float(table.radius, exhaustive=True)[start:]
    suspects = np.flatnonzero(values < bound + _TIE) + start
    exact = ctx.ell_exact_rows(suspects, table.radius, exhaustive=True) if len(suspects) else []
    bad = [int(r) for r, v in zip(suspects, exact) if v < bound]
    return {"radius": radius, "bound": bound, "scanned": len(table.elements) - start, "violations": bad}
