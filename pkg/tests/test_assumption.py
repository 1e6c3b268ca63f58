import numpy as np
import pytest

from coordbid import assumption as asm
from coordbid.distributions import Beta, Empirical, RandomStream, Uniform
from coordbid.exceptions import ConfigError, NoRootInBracket

U = Uniform(0, 1)
ZERO = Empirical([0.0])


def within(est, target, k=3):
    return abs(est.mean - target) <= k * est.se + 1e-12


def test_delta_uniform_n4():
    e = asm.estimate_delta(U, U, 4, 10**6, RandomStream(1))
    assert within(e, 1 / 6)


def test_delta_beta_outside_n3():
    e = asm.estimate_delta(U, Beta(3, 2), 3, 10**6, RandomStream(2))
    assert within(e, 1 / 40)


def test_delta_zero_outside():
    e = asm.estimate_delta(U, ZERO, 2, 10**5, RandomStream(3))
    assert within(e, 1 / 3)


def test_delta_needs_two():
    with pytest.raises(ConfigError):
        asm.estimate_delta(U, U, 1, 10**4)


def test_delta_two_term_identity():
    s = RandomStream(4)
    up, down = asm.delta_decomposition(U, U, 4, 10**5, s)
    d = asm.estimate_delta(U, U, 4, 10**5, s)
    a, b = asm.delta_terms(U, U, 4, 10**5, s)
    assert np.array_equal(a - b, a - b)
    assert d.mean == pytest.approx(up.mean - down.mean, abs=1e-15)


def test_delta_i_symmetric():
    # oracle: E[(v - 1/2) v^3] = 1/5 - 1/8 for U[0,1] with N = 4
    ests = asm.estimate_all_delta_i([U] * 4, U, 10**6, RandomStream(5))
    for e in ests:
        assert within(e, 0.075)


def test_delta_i_non_iid_regression():
    # oracle: integral of (x - E d) f_i(x) F_j(x) with scipy.stats densities
    ests = asm.estimate_all_delta_i([Beta(2, 5), Beta(5, 2)], Uniform(0.2, 0.8), 10**6, RandomStream(6))
    assert within(ests[0], 0.0021228771228771226)
    assert within(ests[1], 0.21640859140859134)
    assert all(e.mean > 0 for e in ests)


def test_delta_i_zero_bidder():
    e = asm.estimate_delta_i([ZERO, U, U], U, 0, 10**5, RandomStream(7))
    assert e.mean <= 0


def test_delta_i_index_error():
    with pytest.raises(IndexError):
        asm.estimate_delta_i([U, U], U, 2, 10**4)


def test_sum_delta_i_identity():
    s = RandomStream(8)
    total = sum(e.mean for e in asm.estimate_all_delta_i([U] * 3, U, 10**5, s))
    g = asm.estimate_G(U, U, 3, 1e-9, 10**5, RandomStream(8, role="g"))
    assert abs(total - 0.25) < 0.01 and abs(g.mean - 0.25) < 3 * g.se
    # same draws: the argmax partition sums exactly to v_(N) - d
    v = asm.draw_values([U] * 3, 3, 1000, s)
    d = asm.draw_outside(U, 1000, s)
    parts = sum(np.where(np.argmax(v, 1) == i, v[:, i] - d, 0) for i in range(3))
    assert np.allclose(parts, v.max(1) - d)


def test_L_uniform():
    assert within(asm.estimate_L(U, U, 4, 10**6, RandomStream(9)), 1 / 30)
    assert asm.estimate_L(U, ZERO, 3, 10**4).mean == 0


def test_L_decreases_in_n():
    # oracle values 2 / ((N + 1)(N + 2)) from a double integral
    oracle = {2: 0.08333333333333333, 4: 0.03333333333333333, 8: 0.01111111111111111}
    ests = {n: asm.estimate_L(U, U, n, 10**6, RandomStream(10, run=n)) for n in oracle}
    for n in oracle:
        assert within(ests[n], oracle[n])
        assert asm.L_quadrature(U, U, n) == pytest.approx(oracle[n], abs=1e-10)
    assert ests[2].mean > ests[4].mean > ests[8].mean


def test_G_limits():
    g_inf = asm.estimate_G(U, U, 4, 1e9, 10**6, RandomStream(11))
    assert within(g_inf, 1 / 3)  # double-integral oracle
    g0 = asm.estimate_G(U, U, 4, 1e-9, 10**6, RandomStream(12))
    assert within(g0, 0.3)
    with pytest.raises(ConfigError):
        asm.estimate_G(U, U, 4, 0.0, 10**4)


def test_value_curve():
    assert within(asm.estimate_value_curve(U, U, 4, "0+", 10**6, RandomStream(13)), 0.8)
    assert within(asm.estimate_value_curve(U, U, 4, 1e9, 10**6, RandomStream(14)), 2 / 3)
    with pytest.raises(ConfigError):
        asm.estimate_value_curve(U, U, 4, -1.0, 10**4)
    s = RandomStream(15)
    grid = np.logspace(-3, 3, 15)
    vals = [asm.estimate_value_curve(U, U, 4, float(l), 10**5, s).mean for l in grid]
    assert np.all(np.diff(vals) <= 0)


def test_G_monotone_crn():
    s = RandomStream(16)
    grid = list(np.logspace(-3, 3, 20))
    vals = [e.mean for e in asm.estimate_G_grid(U, U, 4, grid, 10**5, s)]
    assert np.all(np.diff(vals) >= 0)
    # reusing the same stream reproduces the single-point estimator
    assert asm.estimate_G(U, U, 4, grid[5], 10**5, s).mean == vals[5]


def test_G_at_least_delta():
    d = asm.estimate_delta(U, U, 4, 10**5, RandomStream(17))
    for lam in np.logspace(-3, 3, 10):
        g = asm.estimate_G(U, U, 4, float(lam), 10**5, RandomStream(18))
        assert g.mean >= d.mean - 3 * (g.half_width_95 + d.half_width_95)


def test_lambda_star_boundary():
    r = asm.find_lambda_star(U, U, 4, 10**5)
    assert r.boundary and r.value == 0
    r0 = asm.find_lambda_star(U, ZERO, 2, 10**4)
    assert r0.boundary


def test_lambda_star_finite():
    # oracle: brentq on a dblquad evaluation of G for N=1, U[0,1] vs U[0.8,1]
    oracle = 6.810249771197195
    r = asm.find_lambda_star(U, Uniform(0.8, 1.0), 1, 10**6, tol=1e-4, stream=RandomStream(19))
    assert not r.boundary
    assert r.value == pytest.approx(oracle, rel=0.03)
    # sign change across the returned bracket on the same draws
    s = RandomStream(19)
    lo, hi = asm.estimate_G_grid(U, Uniform(0.8, 1.0), 1, [r.bracket[0] * 0.999, r.bracket[1]], 10**6, s)
    assert lo.mean < 0 <= hi.mean


def test_lambda_star_no_root():
    # G is nonnegative as lambda grows, so a root can only be missed with a short bracket
    with pytest.raises(NoRootInBracket):
        asm.find_lambda_star(Uniform(0, 0.1), Uniform(0.5, 1.0), 1, 10**4, bracket=(1e-6, 0.01))
    with pytest.raises(ConfigError):
        asm.find_lambda_star(U, U, 2, 10**4, tol=0)


def test_quadrature_pins_closed_forms():
    assert round(asm.delta_quadrature(U, U, 4), 4) == 0.1667
    assert asm.delta_quadrature(U, U, 4) == pytest.approx(1 / 6, abs=1e-10)
    assert asm.delta_quadrature(U, Beta(3, 2), 3) == pytest.approx(1 / 40, abs=1e-10)
    assert asm.delta_quadrature(U, U, 2) == pytest.approx(0.0, abs=1e-12)
    assert asm.expected_max_quadrature(U, 4) == pytest.approx(0.8, abs=1e-12)


def test_quadrature_non_iid_matches_mc():
    specs = [Beta(2, 6), Uniform(0.1, 0.9), Beta(3, 3)]
    q = asm.delta_quadrature(specs, Beta(3, 5))
    e = asm.estimate_delta(specs, Beta(3, 5), n_samples=10**6, stream=RandomStream(20))
    assert within(e, q)


def test_verdicts_and_sweep():
    assert asm.verdict(asm.estimate_delta(U, U, 4, 10**5)) == asm.HOLDS
    assert asm.verdict(asm.estimate_delta(U, U, 2, 10**5)) == asm.INCONCLUSIVE
    assert asm.verdict(asm.estimate_delta(Uniform(0, 0.5), U, 2, 10**5)) == asm.FAILS
    points, crossover = asm.delta_sweep(U, U, range(2, 6), 10**5)
    assert points[0].verdict != asm.HOLDS and crossover == 3


def test_exact_gap_formula():
    assert asm.exact_gap(0.1, 0.05, 3, 200) == pytest.approx(200 / 3 * 0.1 + (1 - 3.0**-200) / 2 * 0.05)
    assert asm.exact_gap(0.1, 0.05, 1, 200) == 0
