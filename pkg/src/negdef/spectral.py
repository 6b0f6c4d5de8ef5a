"""Spectrum of the multiplication operator by l_N on l^2 of the group.

The spectrum is the value set of l_N, so its counting function is the
sublevel count of l_N. Every statement here is scoped to the range certified
by the properness threshold.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, HorizonError, InsufficientCertifiedPoints
from .verify import fit_log_slope, properness_threshold, spectrum_grid, sublevel_counts


@dataclass
class SpectralReport:
    counting: list
    d_s_estimate: float | None
    d_hat: float
    heat: list

    def to_dict(self):
        return {
            "d_s_estimate": self.d_s_estimate,
            "d_hat": self.d_hat,
            "certified_points": sum(1 for _, _, c in self.counting if c),
            "heat_trace": [{"t": t, "value": v, "certified_tail": c} for t, v, c in self.heat],
        }


def spectral_counting(ctx, x_grid):
    return sublevel_counts(ctx, x_grid)


def fit_spectral_dimension(pairs):
    return fit_log_slope(pairs, "counting pairs")


def counting_by_rank(ctx, x_grid):
    """Oracle for the counting function: sort all certified values and bisect."""
    radius, bound = properness_threshold(ctx)
    if ctx.table.radius < radius:
        raise HorizonError("certified counting needs the properness ball", radius)
    rows = np.arange(ctx.table.mu[radius])
    values = sorted(ctx.ell_exact_rows(rows, radius))
    return [bisect.bisect_right(values, Fraction(x)) for x in x_grid]


def dirichlet_energy(ctx, a):
    """sum_s l_N(s) a(s)^2 for a finitely supported map {element: value}."""
    table = ctx.table
    if not a:
        return 0.0
    keys = list(a)
    rows = table.index_of(np.array(keys, dtype=np.int64).reshape(-1, table.group.dim))
    if np.any(rows < 0):
        raise HorizonError("support of a leaves the table", table.radius + 1)
    upto = int(table.lengths[rows].max())
    vals = ctx.ell_float(upto)[rows]
    coef = np.array([float(a[k]) for k in keys])
    return float(np.sum(vals * coef * coef))


def heat_trace(ctx, t, fit=None):
    """(sum over the certified ball of exp(-t l_N), certified_tail).

    The tail flag holds when (c (R+1)^d) * exp(-t * bound), a bound on the
    contribution of the remaining horizon, is below 1e-6 of the partial sum.
    """
    if t <= 0:
        raise DomainError("heat trace needs t > 0")
    table = ctx.table
    radius, bound = properness_threshold(ctx)
    upto = min(radius, table.radius)
    vals = ctx.ell_float(upto)
    value = float(np.sum(np.exp(-t * vals)))
    certified = False
    if fit is not None and table.radius >= radius:
        outside = fit.c * (table.radius + 1) ** fit.d
        certified = outside * math.exp(-t * bound) < 1e-6 * value
    return value, certified


def spectral_report(ctx, fit, t_values=(0.1, 1.0, 10.0), x_grid=None):
    if x_grid is None:
        x_grid = spectrum_grid(ctx)
    counting = spectral_counting(ctx, x_grid)
    try:
        d_s = fit_spectral_dimension(counting)
    except InsufficientCertifiedPoints:
        d_s = None
    heat = [(t, *heat_trace(ctx, t, fit)) for t in t_values]
    return SpectralReport(counting, d_s, fit.d_hat, heat)


def write_spectral_csv(counting, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "count", "certified"])
        for x, n, c in counting:
            w.writerow([repr(float(x)), n, int(c)])
