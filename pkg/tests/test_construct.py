import csv
import math
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

import oracles_z1
from negdef import (
    ConstructionParams,
    alpha_sequence,
    build_context,
    classify_indices,
    combined_ell,
    ell,
    omega,
    properness_threshold,
    select_k,
    select_parameters,
    tail_bound,
)
from negdef.construct import _overlap_direct, combination_contexts, overlap_counts, write_ell_csv
from negdef.errors import EmptyCombination, HorizonError, TargetTooTight
from negdef.growth import fit_growth_exponent
from negdef.rng import stream


def fake_fit(d_hat, residual=0.0):
    return SimpleNamespace(d_hat=d_hat, residual=residual)


def test_select_parameters_examples():
    beta, gamma = select_parameters(4.4, fake_fit(4.0))
    assert gamma == pytest.approx(4.4 / 4.05) and gamma == pytest.approx(1.0864, abs=1e-4)
    assert beta == pytest.approx(0.9602, abs=1e-4)
    beta, gamma = select_parameters(1.5, fake_fit(1.0))
    assert gamma == pytest.approx(1.4286, abs=1e-4) and beta == pytest.approx(0.85, abs=1e-3)
    assert 1 / gamma < beta < 1
    with pytest.raises(TargetTooTight):
        select_parameters(4.0, fake_fit(4.0))
    with pytest.raises(TargetTooTight):
        select_parameters(1.06, fake_fit(1.0))
    # the fit residual widens the margin when it exceeds 0.05
    assert select_parameters(3.0, fake_fit(2.0, 0.2))[1] == pytest.approx(3.0 / 2.2)


def test_params_validation():
    with pytest.raises(ValueError):
        ConstructionParams(0.5, 2.0, 3)
    with pytest.raises(ValueError):
        ConstructionParams(0.9, 1.2, -1)


def test_select_k_examples(z1_table):
    E, F = classify_indices(alpha_sequence(z1_table), 0.9, 1.2, 5)
    assert select_k(E, F, 1.2, 1) == 1
    assert select_k(E, F, 1.2, 2) is None
    assert select_k(E, F, 1.2, 3) == 4
    with pytest.raises(HorizonError):
        select_k(E[:5], F, 1.2, 4)


def test_omega_examples(z1_table, heis_small):
    assert omega(z1_table, 5, (3,)) == Fraction(8, 11)
    assert omega(heis_small, 3, (0, 0, 0)) == 1
    far = tuple(int(v) for v in heis_small.elements[heis_small.mu[7]])
    assert omega(heis_small, 3, far) == 0
    with pytest.raises(HorizonError):
        omega(heis_small, 13, (1, 0, 0))


def test_omega_matches_oracle(z1_table):
    for k in (1, 4, 7, 20):
        for s in range(-45, 46, 3):
            assert omega(z1_table, k, (s,)) == oracles_z1.omega(k, s)


def test_omega_symmetry_and_range(heis_small):
    t = heis_small
    g = t.group
    for row in range(0, t.mu[6], 37):
        s = tuple(int(v) for v in t.elements[row])
        w = omega(t, 3, s)
        assert 0 <= w <= 1
        t._omega_memo.clear()
        assert omega(t, 3, g.inverse(s)) == w


def test_fiber_kernel_matches_direct(heis_small, z2_table):
    for table, k in ((heis_small, 4), (z2_table, 6)):
        rows = np.arange(table.mu[2 * k if 2 * k <= table.radius else table.radius])
        fast = overlap_counts(table, k, rows)
        direct = [_overlap_direct(table, k, table.elements[r]) for r in rows]
        assert list(fast) == direct


def test_ell_examples(z1_ctx3):
    assert z1_ctx3.k_sel == {1: 1, 3: 4}
    assert z1_ctx3.skipped == [2]
    v = ell(z1_ctx3, (0,))
    assert v.value == 0 and v.tail_bound == 0 and v.word_length == 0
    assert ell(z1_ctx3, (1,)).value == oracles_z1.ELL3_AT_1
    for s in (9, -9, 15, 40):
        assert ell(z1_ctx3, (s,)).value == 2
    for s in range(-20, 21):
        assert ell(z1_ctx3, (s,)).value == oracles_z1.ell(oracles_z1.KS_N3, s)


def test_tail_bound():
    assert tail_bound(0, 1.08, 3) == 0.0
    a, N, p = 1.08, 3, 2
    direct = sum(min(1.0, p * n**-a) for n in range(N + 1, 200_000))
    assert tail_bound(p, a, N) >= direct
    assert tail_bound(5, 2.0, 1) >= sum(min(1.0, 5 * n**-2.0) for n in range(2, 200_000))


def test_ell_monotone_in_N(z1_table):
    prev = None
    for N in range(1, 9):
        ctx = build_context(z1_table, ConstructionParams(0.9, 1.2, N))
        vals = [ell(ctx, (s,)).value for s in range(0, 25)]
        if prev is not None:
            assert all(a >= b for a, b in zip(vals, prev))
        prev = vals


def test_triangle_property(heis_demo):
    _, ctx = heis_demo
    t = ctx.table
    g = t.group
    rng = stream(9, "triangle")
    idx = rng.integers(0, t.mu[5] - 1, 200)
    for i, j in zip(idx[::2], idx[1::2]):
        a, b = tuple(t.elements[i]), tuple(t.elements[j])
        lab = float(ell(ctx, g.multiply(a, b)).value)
        la, lb = float(ell(ctx, a).value), float(ell(ctx, b).value)
        assert math.sqrt(lab) <= math.sqrt(la) + math.sqrt(lb) + 1e-12


def test_ell_horizon(z1_ctx3):
    with pytest.raises(HorizonError):
        ell(z1_ctx3, (1000,))


def test_combined_examples(z1_ctx3):
    assert combined_ell([z1_ctx3], (0,)) == 0
    assert combined_ell([z1_ctx3], (2,)) == 1
    normalized = ell(z1_ctx3, (2,)).value / oracles_z1.ELL3_AT_1
    assert combined_ell([z1_ctx3, z1_ctx3], (2,)) == Fraction(3, 4) * normalized
    with pytest.raises(EmptyCombination):
        combined_ell([], (1,))


def test_combined_drops_vanishing(z1_table, caplog):
    empty = build_context(z1_table, ConstructionParams(0.9, 1.2, 0))
    assert combined_ell([empty, empty], (3,)) == 0
    assert "vanishes" in caplog.text


def test_combination_contexts(z1_table):
    fit = fit_growth_exponent(z1_table, (30, 60))
    ctxs = combination_contexts(z1_table, fit, 8)
    targets = [c.params.d_target for c in ctxs]
    assert targets == sorted(targets, reverse=True) and len(ctxs) == 3


def test_properness_examples(z1_ctx3, z1_table):
    assert properness_threshold(z1_ctx3) == (12, 2)
    assert all(ell(z1_ctx3, (s,)).value == 2 for s in range(13, 61))
    empty = build_context(z1_table, ConstructionParams(0.9, 1.2, 0))
    assert properness_threshold(empty)[1] == 0


def test_ell_csv(tmp_path, z1_ctx3):
    path = tmp_path / "ell.csv"
    write_ell_csv(z1_ctx3, [0, 1, 2], path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["element", "word_length", "ell_num", "ell_den", "tail_bound", "n_terms"]
    assert rows[1][:4] == ["(0)", "0", "0", "1"]
    assert rows[2][:4] == ["(-1)", "1", "4", "9"] and rows[2][5] == "2"
