import math
from fractions import Fraction

import numpy as np
import pytest

import oracles_z1
from negdef import (
    ConstructionParams,
    build_context,
    check_lemma_bounds,
    check_negative_definite_ell,
    check_positive_definite_omega,
    fit_sublevel_exponent,
    enumerate_balls,
    min_eig_sym,
    omega,
    properness_scan,
    sublevel_counts,
)
from negdef.errors import HorizonError, InsufficientCertifiedPoints, NotSymmetric
from negdef.rng import stream
from negdef.verify import lemma_bound, spectrum_grid


def char_poly_min_eig(M):
    """Smallest root of the characteristic polynomial (2x2 closed form, 3x3 trigonometric)."""
    M = np.asarray(M, dtype=float)
    if len(M) == 2:
        a, b, d = M[0, 0], M[0, 1], M[1, 1]
        return (a + d) / 2 - math.sqrt(((a - d) / 2) ** 2 + b * b)
    q = np.trace(M) / 3
    p1 = M[0, 1] ** 2 + M[0, 2] ** 2 + M[1, 2] ** 2
    p2 = sum((M[i, i] - q) ** 2 for i in range(3)) + 2 * p1
    p = math.sqrt(p2 / 6)
    if p == 0:
        return q
    r = np.linalg.det((M - q * np.eye(3)) / p) / 2
    phi = math.acos(max(-1.0, min(1.0, r))) / 3
    return q + 2 * p * math.cos(phi + 2 * math.pi / 3)


def test_min_eig_examples():
    assert min_eig_sym(np.eye(3)) == pytest.approx(1)
    assert min_eig_sym([[0, 1], [1, 0]]) == pytest.approx(-1)
    assert min_eig_sym([[2, 1], [1, 2]]) == pytest.approx(1)
    with pytest.raises(NotSymmetric):
        min_eig_sym([[1, 2], [0, 1]])


def test_min_eig_vs_characteristic_polynomial():
    rng = np.random.default_rng(4)
    for n in (2, 3):
        for _ in range(200):
            A = rng.normal(size=(n, n))
            M = A + A.T
            ref = char_poly_min_eig(M)
            assert abs(min_eig_sym(M) - ref) <= 1e-10 * max(1.0, np.abs(M).max())


def test_psd_omega_examples(z1_table, z1_ctx3):
    assert check_positive_definite_omega(z1_ctx3, 1, [(0,)]).min_eigenvalue == pytest.approx(1)
    M = np.array([[float(omega(z1_table, 5, (b - a,))) for b in (-1, 0, 1)] for a in (-1, 0, 1)])
    assert M[0, 1] == pytest.approx(10 / 11) and M[0, 2] == pytest.approx(9 / 11)
    assert min_eig_sym(M) == pytest.approx(char_poly_min_eig(M)) and min_eig_sym(M) > 0
    rep = check_positive_definite_omega(z1_ctx3, 3, [(1,), (1,), (4,), (-3,)])
    assert rep.passed


def test_cnd_example(z1_ctx3):
    class Fixed:
        def integers(self, lo, hi, size):
            return list(oracles_z1.CND_VECTOR)

    rep = check_negative_definite_ell(z1_ctx3, [(s,) for s in oracles_z1.CND_SAMPLE], trials=1, rng=Fixed())
    assert rep.exact_forms == [oracles_z1.CND_VALUE]
    assert rep.passed
    one = check_negative_definite_ell(z1_ctx3, [(0,)], trials=3, rng=stream(0, "x"))
    assert one.passed and one.exact_forms == [0, 0, 0]


def test_schoenberg_small_t_is_all_ones(z1_ctx3):
    rep = check_negative_definite_ell(z1_ctx3, [(0,), (1,), (5,)], t_grid=(1e-12,), trials=1, rng=stream(0, "t"))
    assert rep.schoenberg[1e-12].min_eigenvalue == pytest.approx(0, abs=1e-9)


def test_cnd_random_heisenberg(heis_demo):
    _, ctx = heis_demo
    t = ctx.table
    rng = stream(3, "cnd-test")
    for _ in range(5):
        sample = [tuple(t.elements[i]) for i in rng.sample_indices(t.mu[5], 10)]
        assert check_negative_definite_ell(ctx, sample, trials=25, rng=rng).passed


def test_pair_products_beyond_horizon(heis_small):
    ctx = build_context(heis_small, ConstructionParams(0.9, 1.2, 2))
    far = tuple(int(v) for v in heis_small.elements[-1])
    with pytest.raises(HorizonError):
        check_positive_definite_omega(ctx, 1, [far, heis_small.group.inverse(far)])


def test_lemma_bounds_z1(z1_ctx3):
    rep = check_lemma_bounds(z1_ctx3, 6, stream(0, "lemma"))
    assert rep.passed
    assert not rep.generator_violations


def test_lemma_bound_values():
    lin, quad, fix = lemma_bound(0, 1, 1.08)
    assert lin == quad == fix == 0
    lin, _, _ = lemma_bound(1, 1, 1.08)
    assert lin >= 1


def test_lemma_p_max_horizon(heis_demo):
    _, ctx = heis_demo
    with pytest.raises(HorizonError):
        check_lemma_bounds(ctx, 41, stream(0, "l"))


def test_sublevel_examples(z1_ctx3):
    (x1, n1, c1), (x0, n0, c0), (x2, n2, c2) = sublevel_counts(z1_ctx3, [1, 0, 2])
    assert (n1, c1) == (5, True)
    assert (n0, c0) == (1, True)
    assert c2 is False


def test_sublevel_matches_oracle(z1_ctx3):
    for x in [Fraction(1, 3), Fraction(4, 9), Fraction(1, 2), Fraction(3, 2)]:
        _, count, cert = sublevel_counts(z1_ctx3, [x])[0]
        want = sum(1 for s in range(-60, 61) if oracles_z1.ell(oracles_z1.KS_N3, s) <= x)
        assert cert and count == want


def test_sublevel_counts_independent_of_horizon(z1, z1_ctx3):
    small = build_context(enumerate_balls(z1, 14), ConstructionParams(0.9, 1.2, 3))
    xs = spectrum_grid(z1_ctx3)
    a = [r for r in sublevel_counts(z1_ctx3, xs) if r[2]]
    b = [r for r in sublevel_counts(small, xs) if r[2]]
    assert a == b


def test_fit_sublevel_exponent():
    pts = [(x, int(3 * x**2), True) for x in (1.0, 2.0, 3.0, 4.0, 5.0)]
    assert fit_sublevel_exponent(pts) == pytest.approx(2, abs=0.05)
    assert fit_sublevel_exponent([(x, 7, True) for x in (1, 2, 3, 4)]) == 0.0
    with pytest.raises(InsufficientCertifiedPoints):
        fit_sublevel_exponent([(1, 5, True), (2, 9, True), (3, 11, False), (4, 13, True)])


def test_properness_scan_z1(z1_ctx3):
    scan = properness_scan(z1_ctx3)
    assert scan["radius"] == 12 and scan["violations"] == []
    assert scan["scanned"] == 2 * (60 - 12)


def test_properness_scan_heisenberg_small(heis_table):
    ctx = build_context(heis_table, ConstructionParams(0.5, 2.1, 1))
    scan = properness_scan(ctx)
    assert scan["violations"] == [] and scan["scanned"] > 0
