import math
from fractions import Fraction

import numpy as np
import pytest

from hitlaw.base_process import BaseProcess, make_rng, sample_window
from hitlaw.circle import (BallTarget, CirclePoint, CircleRDS,
                           annulus_mass_check, aperiodicity_probe,
                           circle_distance, hitting_time_ball,
                           quenched_law_statistic, random_orbit, required_bits)
from hitlaw.errors import PrecisionBudgetError


@pytest.fixture
def rds():
    return CircleRDS()


def test_point_validation_and_budget():
    with pytest.raises(ValueError):
        CirclePoint(5, 4)
    with pytest.raises(ValueError):
        CirclePoint(-1, 4)
    p = CirclePoint.uniform(make_rng(1), 128)
    assert p.budget_bits == 128
    assert 0 <= p.numerator < p.denominator == 2**128


def test_rds_validation():
    with pytest.raises(ValueError):
        CircleRDS(multipliers=(1, 3))
    with pytest.raises(ValueError):
        CircleRDS(base=BaseProcess.bernoulli([0.2, 0.3, 0.5]))
    assert CircleRDS().max_multiplier == 3


def test_orbit_third_under_doubling_is_period_two(rds):
    x0 = CirclePoint.from_fraction(1, 3)
    pts = random_orbit(rds, [0] * 6, x0, 6).points()
    vals = [p.as_fraction() for p in pts]
    assert vals == [Fraction(2, 3), Fraction(1, 3)] * 3


def test_orbit_zero_fixed_point(rds):
    x0 = CirclePoint.from_fraction(0, 1)
    pts = random_orbit(rds, [0, 1, 1, 0], x0, 4).points()
    assert all(p.numerator == 0 for p in pts)


def test_orbit_matches_rational_oracle(rds):
    rng = make_rng(7)
    for _ in range(100):
        q = int(rng.integers(2, 10**6))
        a = int(rng.integers(0, q))
        bits = rng.integers(0, 2, size=100)
        x0 = CirclePoint.from_fraction(a, q)
        got = [p.numerator for p in random_orbit(rds, bits, x0, 100)]
        num = a
        want = []
        for b in bits:
            num = (num * rds.multipliers[int(b)]) % q
            want.append(num)
        assert got == want


def test_orbit_budget_enforced(rds):
    p = CirclePoint.uniform(make_rng(2), required_bits(50, 3))
    random_orbit(rds, [0] * 50, p, 50)   # fits
    with pytest.raises(PrecisionBudgetError):
        random_orbit(rds, [0] * 500, p, 500)
    # exact rational seeds carry no budget
    random_orbit(rds, [0] * 500, CirclePoint.from_fraction(1, 3), 500)


def test_orbit_requires_enough_bits(rds):
    with pytest.raises(ValueError):
        random_orbit(rds, [0, 1], CirclePoint.from_fraction(1, 3), 5)


def test_circle_distance_exact():
    p = CirclePoint.from_fraction(1, 8)
    assert circle_distance(p, 0.875) == Fraction(1, 4)
    assert circle_distance(p, Fraction(1, 8)) == 0


def test_uniform_pushforward_stays_uniform(rds):
    # Lebesgue is preserved by each map: push 1e5 uniform points through
    # 20 random steps and compare the empirical law to uniform (DKW band).
    n = 10**5
    steps = 20
    rng = make_rng(11)
    bits = sample_window(rds.base, 13, steps)
    precision = required_bits(steps, rds.max_multiplier)
    vals = np.empty(n)
    for i in range(n):
        x = CirclePoint.uniform(rng, precision)
        for p in random_orbit(rds, bits, x, steps):
            pass
        vals[i] = p.value
    vals.sort()
    grid = (np.arange(1, n + 1)) / n
    dkw = math.sqrt(math.log(2 / 0.01) / (2 * n))
    sup = np.max(np.maximum(np.abs(grid - vals), np.abs(grid - 1 / n - vals)))
    assert sup < dkw


def test_hitting_counts_from_one(rds):
    # start inside the ball: the first visit at k >= 1 is what counts
    target = BallTarget(center=0.0, radius=0.05)
    x0 = CirclePoint.from_fraction(0, 1)
    assert hitting_time_ball(rds, [0] * 10, x0, target, 10) == 1   # stays at 0
    x1 = CirclePoint.from_fraction(1, 3)
    assert hitting_time_ball(rds, [0] * 50, x1, target, 50) is None


def test_hitting_mean_near_kac_value(rds):
    # heuristic diagnostic: mean hitting time ~ 1/(ball measure); the exact
    # escape rate depends on the hole placement, so keep a generous band
    r = 0.01
    target = BallTarget(center=0.61803, radius=r)
    trials = 10**4
    cap = 2000
    rng = make_rng(21)
    bits = [0] * cap   # doubling map
    precision = required_bits(cap, rds.max_multiplier)
    total = 0
    hits = 0
    for _ in range(trials):
        x0 = CirclePoint.uniform(rng, precision)
        k = hitting_time_ball(rds, bits, x0, target, cap)
        if k is not None:
            total += k
            hits += 1
    mean = total / hits
    assert abs(mean - 1 / (2 * r)) / (1 / (2 * r)) < 0.1


def test_quenched_law_statistic_basics(rds):
    bits = sample_window(rds.base, 31, 10)
    out = quenched_law_statistic(rds, bits, y=0.3, r=0.05, t_grid=[0.0, 0.5, 1.0],
                                 trials=200, seed=5)
    assert out.survival[0] == 1.0
    assert np.all(np.diff(out.survival) <= 1e-12)
    assert out.delta_r == pytest.approx(
        float(np.max(np.abs(out.survival - np.exp(-out.t_grid)))))
    with pytest.raises(ValueError):
        quenched_law_statistic(rds, bits, 0.3, 0.05, [0.0, 1.0], trials=50, seed=5)


def test_quenched_law_widened_when_capped(rds):
    bits = sample_window(rds.base, 32, 10)
    out = quenched_law_statistic(rds, bits, y=0.3, r=0.05, t_grid=[0.0, 1.0],
                                 trials=100, seed=6, cap=3)
    assert out.widened_uncertainty


def test_annulus_mass_check_examples_and_sweep():
    assert annulus_mass_check(0.5, 0.1, 0.01)
    assert annulus_mass_check(0.2, 0.4, 0.05)
    rng = make_rng(9)
    for _ in range(1000):
        r = float(rng.uniform(1e-4, 0.499))
        rho = float(rng.uniform(0.0, r))
        if rho <= 0.0 or rho >= r:
            continue
        assert annulus_mass_check(float(rng.random()), r, rho)
    with pytest.raises(ValueError):
        annulus_mass_check(0.5, 0.6, 0.01)


def test_aperiodicity_probe_uniform_is_zero(rds):
    bits = sample_window(rds.base, 41, 50)
    frac = aperiodicity_probe(rds, bits, trials=1000, horizon=50, seed=8)
    assert frac == 0.0


def test_aperiodicity_probe_forced_points(rds):
    assert aperiodicity_probe(rds, [0] * 50, 1, 50, 0,
                              points=[CirclePoint.from_fraction(0, 1)]) == 1.0
    assert aperiodicity_probe(rds, [0] * 50, 1, 50, 0,
                              points=[CirclePoint.from_fraction(1, 3)]) == 1.0
