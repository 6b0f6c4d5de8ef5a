import math
from fractions import Fraction

import pytest

import oracles_z1
from negdef import counting_by_rank, fit_growth_exponent, dirichlet_energy, heat_trace, spectral_counting, spectral_report
from negdef.errors import DomainError, HorizonError, InsufficientCertifiedPoints
from negdef.rng import stream
from negdef.spectral import fit_spectral_dimension, write_spectral_csv
from negdef.verify import spectrum_grid


def test_counting_examples(z1_ctx3):
    (_, n1, c1), (_, n0, _) = spectral_counting(z1_ctx3, [1, 0])
    assert (n1, c1) == (5, True) and n0 == 1


def test_counting_monotone_and_rank_oracle(z1_demo, heis_demo):
    for _, ctx in (z1_demo, heis_demo):
        grid = spectrum_grid(ctx)
        grid = sorted(set(grid) | {Fraction(1, 7), Fraction(1, 2)})
        counts = [n for _, n, _ in spectral_counting(ctx, grid)]
        assert counts == sorted(counts)
        assert counts == counting_by_rank(ctx, grid)


def test_fit_spectral_dimension():
    assert fit_spectral_dimension([(x, 4, True) for x in (1, 2, 3, 4)]) == 0.0
    with pytest.raises(InsufficientCertifiedPoints):
        fit_spectral_dimension([(1, 2, True)])


def test_z1_demo_dimension(z1_demo):
    fit, ctx = z1_demo
    rep = spectral_report(ctx, fit)
    assert rep.d_s_estimate is not None and rep.d_s_estimate <= 1.5 + 0.5


def test_dirichlet_examples(z1_ctx3):
    assert dirichlet_energy(z1_ctx3, {(0,): 1.0}) == 0
    assert dirichlet_energy(z1_ctx3, {(1,): 1.0}) == pytest.approx(4 / 9, rel=1e-15)
    assert dirichlet_energy(z1_ctx3, {(1,): 3.0}) == pytest.approx(4, rel=1e-15)
    assert dirichlet_energy(z1_ctx3, {}) == 0
    with pytest.raises(HorizonError):
        dirichlet_energy(z1_ctx3, {(999,): 1.0})


def test_parallelogram_law(heis_demo):
    _, ctx = heis_demo
    t = ctx.table
    rng = stream(8, "parallelogram")
    for _ in range(100):
        idx = rng.sample_indices(t.mu[6], 8)
        keys = [tuple(int(v) for v in t.elements[i]) for i in idx]
        a = {k: rng.below(2001) / 100 - 10 for k in keys[:5]}
        b = {k: rng.below(2001) / 100 - 10 for k in keys[3:]}
        plus = {k: a.get(k, 0) + b.get(k, 0) for k in set(a) | set(b)}
        minus = {k: a.get(k, 0) - b.get(k, 0) for k in set(a) | set(b)}
        lhs = dirichlet_energy(ctx, plus) + dirichlet_energy(ctx, minus)
        rhs = 2 * dirichlet_energy(ctx, a) + 2 * dirichlet_energy(ctx, b)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))


def test_heat_trace(z1_ctx3):
    value, _ = heat_trace(z1_ctx3, 1.0)
    want = sum(math.exp(-float(oracles_z1.ell(oracles_z1.KS_N3, s))) for s in range(-12, 13))
    assert value == pytest.approx(want, rel=1e-13)
    big, _ = heat_trace(z1_ctx3, 500.0)
    assert big == pytest.approx(1.0)
    vals = [heat_trace(z1_ctx3, t)[0] for t in (0.1, 0.5, 1, 2, 10)]
    assert vals == sorted(vals, reverse=True)
    with pytest.raises(DomainError):
        heat_trace(z1_ctx3, 0)


def test_heat_tail_flag(z1_table, z1_ctx3):
    fit = fit_growth_exponent(z1_table, (30, 60))
    assert heat_trace(z1_ctx3, 0.1, fit)[1] is False
    assert heat_trace(z1_ctx3, 50.0, fit)[1] is True


def test_spectral_csv(tmp_path, z1_ctx3):
    path = tmp_path / "spectral.csv"
    write_spectral_csv(spectral_counting(z1_ctx3, [0, Fraction(4, 9), 3]), path)
    assert path.read_text() == "x,count,certified\n0.0,1,1\n0.4444444444444444,3,1\n3.0,25,0\n"
