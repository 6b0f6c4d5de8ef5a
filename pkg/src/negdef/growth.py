"""Growth statistics of a ball table.

alpha_n = mu(K^n)/mu(K^{n-1}) - 1 (alpha_1 = 0 by convention), log-log
exponent fits with a certified envelope mu(K^n) <= c (n+1)^d, and the
exceptional index sets

    E_beta      = {n >= 1 : alpha_n > n^-beta}
    F_beta,gamma = {n >= 1 : every integer k in [n^gamma, (n+1)^gamma] is in E_beta}.

Membership is decided exactly (see :mod:`negdef.exact`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from mpmath import iv
from mpmath.libmp import to_rational

from .errors import FitWindowError, HorizonError
from .exact import ceil_pow, compare_pow, floor_pow, pow_enclosure, round_up

GRID_STEP = 0.05
K0 = math.log(2)


@dataclass(frozen=True)
class GrowthFit:
    d_hat: float
    c: float
    d: float
    d_prime: float
    window: tuple
    residual: float


@dataclass
class GrowthProfile:
    alpha: list
    fit: GrowthFit
    flags_E: np.ndarray
    flags_F: np.ndarray
    beta: float
    gamma: float


def alpha_sequence(table):
    """[alpha_1, ..., alpha_R] as Fractions."""
    mu = table.mu
    if len(mu) < 3:
        raise ValueError("alpha needs a table of radius >= 2")
    return [Fraction(0)] + [Fraction(mu[n], mu[n - 1]) - 1 for n in range(2, len(mu))]


def _certified(mu, c, d):
    """True iff mu[n] <= c (n+1)^d for every n, decided exactly."""
    c = Fraction(c)
    return all(compare_pow(Fraction(m) / c, n + 1, d) <= 0 for n, m in enumerate(mu))


def _envelope_constant(mu, d):
    best = Fraction(0)
    for n, m in enumerate(mu):
        lo, _ = pow_enclosure(n + 1, d, 64)
        best = max(best, Fraction(m) / lo)
    return round_up(best)


def fit_growth_exponent(table, window):
    lo, hi = (int(w) for w in window)
    if lo < 2 or hi > table.radius or hi - lo + 1 < 4:
        raise FitWindowError(f"window {window} must lie in [2, {table.radius}] and span >= 4 radii")
    ns = np.arange(lo, hi + 1)
    y = np.log(np.array(table.mu[lo : hi + 1], dtype=float))
    x = np.log(ns.astype(float))
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    d_hat = float(slope)
    for j in range(200):
        d = d_hat + j * GRID_STEP
        c = _envelope_constant(table.mu, d)
        if _certified(table.mu, c, d):
            break
    else:  # pragma: no cover
        raise ArithmeticError("no certified growth pair on the exponent grid")
    return GrowthFit(d_hat, c, d, d + math.log2(c), (lo, hi), residual)


def classify_E(alpha, beta):
    """flags[n] = (alpha_n > n^-beta), exact; flags[0] is False."""
    flags = np.zeros(len(alpha) + 1, dtype=bool)
    for n, a in enumerate(alpha, start=1):
        flags[n] = compare_pow(a, n, -Fraction(beta)) > 0
    return flags


def classify_E_float(alpha, beta, slack=1e-9):
    """Float decision with relative slack: 1 / 0, or -1 when too close to call."""
    out = np.full(len(alpha) + 1, 0, dtype=np.int8)
    for n, a in enumerate(alpha, start=1):
        t = n ** (-beta)
        af = float(a)
        if af > t * (1 + slack):
            out[n] = 1
        elif af < t * (1 - slack):
            out[n] = 0
        else:
            out[n] = -1
    return out


def check_params(beta, gamma):
    if not 0 < beta < 1:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if Fraction(beta) * Fraction(gamma) <= 1:
        raise ValueError(f"gamma must exceed 1/beta, got beta={beta}, gamma={gamma}")


def interval_integers(n, gamma):
    """(first, last) integer of [n^gamma, (n+1)^gamma]."""
    return ceil_pow(n, gamma), floor_pow(n + 1, gamma)


def classify_indices(alpha, beta, gamma, N):
    """Exact E_beta flags over all of alpha and F_{beta,gamma} flags for n <= N."""
    check_params(beta, gamma)
    need = floor_pow(N + 1, gamma) if N >= 1 else 0
    if need > len(alpha):
        raise HorizonError(f"F flags up to n={N} need alpha up to {need}", need)
    flags_E = classify_E(alpha, beta)
    flags_F = np.zeros(N + 1, dtype=bool)
    for n in range(1, N + 1):
        a, b = interval_integers(n, gamma)
        flags_F[n] = bool(np.all(flags_E[a : b + 1]))
    return flags_E, flags_F


def max_classifiable(radius, gamma):
    """Largest n whose interval [n^gamma, (n+1)^gamma] fits in radius."""
    n = 0
    while floor_pow(n + 2, gamma) <= radius:
        n += 1
    return n


def _iv_to_fraction_lo(x):
    return Fraction(*to_rational(x._mpi_[0]))


def density_bound_lower(fit, beta, n, prec=80):
    """Certified lower enclosure of (d'/ln 2) log(n+1) / n^(1-beta)."""
    old = iv.prec
    iv.prec = prec
    try:
        dprime = iv.mpf(Fraction(fit.d).numerator) / Fraction(fit.d).denominator + iv.log(
            iv.mpf(Fraction(fit.c).numerator) / Fraction(fit.c).denominator
        ) / iv.log(2)
        b = Fraction(beta)
        power = iv.mpf(n) ** (1 - iv.mpf(b.numerator) / b.denominator)
        val = dprime / iv.log(2) * iv.log(iv.mpf(n + 1)) / power
    finally:
        iv.prec = old
    return _iv_to_fraction_lo(val)


def density_report(flags_E, fit, beta):
    """Rows (n, empirical density, bound, ok) for every n covered by flags_E."""
    rows = []
    count = 0
    for n in range(1, len(flags_E)):
        count += int(flags_E[n])
        emp = Fraction(count, n)
        bound = density_bound_lower(fit, beta, n)
        rows.append((n, emp, float(bound), emp <= bound))
    return rows


def growth_profile(table, beta, gamma, N, window):
    alpha = alpha_sequence(table)
    fit = fit_growth_exponent(table, window)
    flags_E, flags_F = classify_indices(alpha, beta, gamma, N)
    return GrowthProfile(alpha, fit, flags_E, flags_F, beta, gamma)


def write_growth_csv(table, alpha, flags_E, flags_F, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "mu_n", "alpha_num", "alpha_den", "in_E", "in_F"])
        for n in range(1, len(alpha) + 1):
            a = alpha[n - 1]
            in_F = int(flags_F[n]) if n < len(flags_F) else ""
            w.writerow([n, table.mu[n], a.numerator, a.denominator, int(flags_E[n]), in_F])
