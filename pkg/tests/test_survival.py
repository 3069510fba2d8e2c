import itertools
import math

import numpy as np
import pytest

import oracle_enum
from conftest import random_base, random_fiber_measure

from hitlaw.base_process import BaseProcess, make_rng, sample_window
from hitlaw.errors import ResourceLimitError
from hitlaw.fiber import FiberMeasure, Pattern, fiber_cylinder_measure
from hitlaw.survival import (SurvivalCurve, annealed_survival,
                             build_automaton, conditional_return_survival,
                             quenched_survival, rescaled_survival,
                             sample_hitting_time)


def test_automaton_hand_transitions():
    aut = build_automaton(Pattern((0, 0), 2))
    assert aut.delta[1, 0] == 2
    assert aut.delta[1, 1] == 0
    assert aut.border == 1
    aut = build_automaton(Pattern((0, 1), 2))
    assert aut.delta[1, 0] == 1   # failed match keeps the fresh '0'
    assert aut.delta[1, 1] == 2
    assert aut.border == 0


def test_automaton_prefix_step_and_full_read():
    rng = make_rng(1)
    for _ in range(50):
        b = int(rng.integers(2, 4))
        n = int(rng.integers(1, 4))
        pat = Pattern(tuple(rng.integers(0, b, size=n)), b)
        aut = build_automaton(pat)
        for i in range(n):
            assert aut.delta[i, pat.symbols[i]] == i + 1
        # reading the whole word from any state visits the accepting state
        for start in range(n):
            state = start
            seen = False
            for c in pat.symbols:
                state = int(aut.delta[state, c])
                seen = seen or state == n
            assert seen


def test_automaton_occurrences_match_naive_scan():
    rng = make_rng(2)
    for _ in range(30):
        b = int(rng.integers(2, 4))
        n = int(rng.integers(1, 4))
        pat = Pattern(tuple(rng.integers(0, b, size=n)), b)
        aut = build_automaton(pat)
        for length in range(0, 9):
            for word in itertools.product(range(b), repeat=length):
                state = 0
                visits = []
                for pos, c in enumerate(word):
                    state = int(aut.delta[state, c])
                    if state == n:
                        visits.append(pos)
                naive = [p + n - 1 for p in range(length - n + 1)
                         if word[p:p + n] == pat.symbols]
                assert visits == naive


def _random_config(rng, max_n=3, max_b=3):
    s = int(rng.integers(2, 4))
    b = int(rng.integers(2, max_b + 1))
    n = int(rng.integers(1, max_n + 1))
    fm = random_fiber_measure(rng, s, b)
    proc = random_base(rng, s)
    win = sample_window(proc, int(rng.integers(0, 2**32)), 40)
    pat = Pattern(tuple(rng.integers(0, b, size=n)), b)
    return fm, proc, win, pat


def test_quenched_survival_matches_enumeration():
    rng = make_rng(3)
    for _ in range(25):
        fm, _, win, pat = _random_config(rng)
        offset = int(rng.integers(0, 3))
        k_max = int(rng.integers(1, 7))
        got = quenched_survival(fm, win, pat, offset=offset, k_max=k_max)
        want = oracle_enum.enum_quenched_survival(
            fm.W, win.prefix(len(win)), pat.symbols, offset, k_max)
        assert np.max(np.abs(got.values - want)) < 1e-12


def test_conditional_survival_matches_enumeration():
    rng = make_rng(4)
    for _ in range(25):
        fm, _, win, pat = _random_config(rng)
        offset = int(rng.integers(0, 3))
        k_max = int(rng.integers(1, 7))
        got = conditional_return_survival(fm, win, pat, offset=offset, k_max=k_max)
        want = oracle_enum.enum_conditional_survival(
            fm.W, win.prefix(len(win)), pat.symbols, offset, k_max)
        assert np.max(np.abs(got.values - want)) < 1e-12


def test_quenched_single_symbol_closed_form(coin_pair):
    _, fm = coin_pair
    proc = BaseProcess.bernoulli([0.5, 0.5])
    win = sample_window(proc, seed=21, length=30)
    pat = Pattern((0,), 2)
    curve = quenched_survival(fm, win, pat, offset=2, k_max=12)
    rows = win.prefix(15)
    expected = 1.0
    for i in range(1, 13):
        expected *= 1.0 - fm.W[rows[2 + i], 0]
        assert curve.values[i] == pytest.approx(expected, abs=1e-15)


def test_quenched_doubled_symbol_hand_value():
    fm = FiberMeasure([[0.5, 0.5], [0.5, 0.5]])
    proc = BaseProcess.bernoulli([0.5, 0.5])
    win = sample_window(proc, seed=1, length=10)
    curve = quenched_survival(fm, win, Pattern((0, 0), 2), k_max=2)
    assert curve.values[0] == 1.0
    assert curve.values[2] == pytest.approx(0.625, abs=1e-15)


def test_conditional_hand_values(coin_pair):
    # i.i.d. fiber with P(0) = p: joint survival p * (1-p)^j for the word "0"
    fm = FiberMeasure([[0.3, 0.7], [0.3, 0.7]])
    proc = BaseProcess.bernoulli([0.5, 0.5])
    win = sample_window(proc, seed=2, length=20)
    curve = conditional_return_survival(fm, win, Pattern((0,), 2), k_max=10)
    for j in range(11):
        assert curve.values[j] == pytest.approx(0.3 * 0.7**j, rel=1e-12)
    # word "00", fair coin: joint value at j=1 is P(001*) = 1/8
    fm2 = FiberMeasure([[0.5, 0.5], [0.5, 0.5]])
    curve2 = conditional_return_survival(fm2, win, Pattern((0, 0), 2), k_max=1)
    assert curve2.values[0] == pytest.approx(0.25, abs=1e-15)
    assert curve2.values[1] == pytest.approx(0.125, abs=1e-15)


def test_survival_monotone_and_first_occurrence_mass():
    rng = make_rng(6)
    for _ in range(10):
        fm, _, win, pat = _random_config(rng)
        curve = quenched_survival(fm, win, pat, k_max=10)
        assert curve.values[0] == 1.0
        diffs = -np.diff(curve.values)
        assert np.all(diffs >= -1e-15)


def test_decomposition_identity():
    rng = make_rng(7)
    for _ in range(10):
        fm, _, win, pat = _random_config(rng)
        g = int(rng.integers(1, 8))
        mu = fiber_cylinder_measure(fm, win, pat, offset=0)
        cond = conditional_return_survival(fm, win, pat, offset=0, k_max=g)
        entered = mu - cond.values[g]
        assert entered >= -1e-12
        assert cond.values[0] == pytest.approx(mu, abs=1e-15)


def test_survival_curve_invariants_enforced():
    meta_args = dict(k_grid=[0, 1], meta=None)
    from hitlaw.survival import CurveMeta
    meta = CurveMeta("0", "w", 0)
    with pytest.raises(ValueError):
        SurvivalCurve(k_grid=np.array([0, 1]), values=np.array([0.5, 0.9]), meta=meta)
    with pytest.raises(ValueError):
        SurvivalCurve(k_grid=np.array([1, 0]), values=np.array([1.0, 0.5]), meta=meta)
    with pytest.raises(ValueError):
        SurvivalCurve(k_grid=np.array([0, 1]), values=np.array([1.0, 1.5]), meta=meta)


def test_rescaled_survival_basics(coin_pair):
    proc, fm = coin_pair
    n = 6
    pat = Pattern((0, 1, 0, 0, 1, 1), 2)
    t_grid = [0.0, 0.5, 1.0, 2.0]
    k_max = math.floor(2.0 * 2**n)
    win = sample_window(proc, seed=31, length=k_max + n + 1)
    curve = rescaled_survival(fm, proc, win, pat, t_grid)
    assert curve.values[0] == 1.0
    assert curve.k_values[0] == 0
    assert np.all(curve.k_values == [math.floor(t * 2**n) for t in t_grid])
    full = quenched_survival(fm, win, pat, k_max=k_max)
    for t, k, v in zip(curve.t_grid, curve.k_values, curve.values):
        assert v == full.value_at(int(k))


def test_rescaled_single_symbol_closed_form():
    fm = FiberMeasure([[0.3, 0.7], [0.3, 0.7]])
    proc = BaseProcess.bernoulli([0.5, 0.5])
    pat = Pattern((0,), 2)
    win = sample_window(proc, seed=8, length=200)
    curve = rescaled_survival(fm, proc, win, pat, [0.0, 0.1, 0.3])
    p_marg = 0.3   # both rows equal, so the marginal equals the fiber law
    for t, v in zip(curve.t_grid, curve.values):
        assert v == pytest.approx((1 - 0.3) ** math.floor(t / p_marg), rel=1e-12)


def test_rescaled_step_cap(coin_pair):
    proc, fm = coin_pair
    pat = Pattern((0,) * 10, 2)
    win = sample_window(proc, seed=1, length=50)
    with pytest.raises(ResourceLimitError) as exc:
        rescaled_survival(fm, proc, win, pat, [0.0, 4.0], step_cap=100)
    assert "4.0" in str(exc.value)


def test_sample_hitting_geometric_case():
    # near-certain symbol: hitting time 1 with probability ~0.999
    fm = FiberMeasure([[0.999, 0.001], [0.999, 0.001]])
    proc = BaseProcess.bernoulli([0.5, 0.5])
    win = sample_window(proc, seed=4, length=10)
    rng = make_rng(40)
    hits = sum(sample_hitting_time(fm, win, Pattern((0,), 2), rng, cap=10**4) == 1
               for _ in range(10**4))
    sigma = math.sqrt(0.999 * 0.001 / 10**4)
    assert abs(hits / 10**4 - 0.999) < 3 * sigma


def test_sample_hitting_censored_never_raises(coin_pair):
    proc, fm = coin_pair
    win = sample_window(proc, seed=5, length=10)
    pat = Pattern((0,) * 8, 2)
    out = sample_hitting_time(fm, win, pat, make_rng(1), cap=3)
    assert out is None or 1 <= out <= 3


def test_sample_hitting_empirical_cdf_matches_exact(coin_pair):
    proc, fm = coin_pair
    pat = Pattern((0, 0, 1), 2)
    k_max = 60
    win = sample_window(proc, seed=6, length=k_max + pat.n + 1)
    exact = quenched_survival(fm, win, pat, k_max=k_max)
    trials = 10**4
    rng = make_rng(60)
    taus = np.array([sample_hitting_time(fm, win, pat, rng, cap=k_max) or (k_max + 1)
                     for _ in range(trials)])
    emp = np.array([(taus > k).mean() for k in range(k_max + 1)])
    assert np.max(np.abs(emp - exact.values)) < 1.36 / math.sqrt(trials) * 1.5


def test_annealed_survival_degenerate_and_zero_variance(coin_pair):
    proc, fm = coin_pair
    pat = Pattern((0, 1, 0), 2)
    t_grid = [0.0, 0.5, 1.0]
    out = annealed_survival(fm, proc, pat, t_grid, n_windows=1, seed=17)
    win = sample_window(proc, [17, 0], math.floor(1.0 * 2**3) + pat.n + 1)
    single = rescaled_survival(fm, proc, win, pat, t_grid)
    assert np.array_equal(out.mean, single.values)
    out5 = annealed_survival(fm, proc, pat, t_grid, n_windows=5, seed=17)
    assert out5.mean[0] == 1.0
    assert out5.stderr[0] == 0.0
