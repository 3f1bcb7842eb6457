import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import g_power, golden_min, simplex_oracle
from wblab.droplets import (
    PowerLawParams, ball_energy_g, best_two_ball_split, c_np, g_second, linear_growth_limit, minimal_energy_E,
    optimal_partition, partition_sweep, split_derivative, split_function_f, split_second_derivative,
    split_thresholds, subadditivity_probe,
)

P = PowerLawParams(1, 2, 1)

# product Gauss-Legendre with 160 and 300 nodes agree to 1e-13; frozen here
C_2_3 = 0.22299543221876


def test_c12_closed_form_vs_symbolic():
    ref = mpmath.quad(lambda x, y: (x - y) ** 2, [-1, 1], [-1, 1]) / 2 ** 4
    assert c_np(1, 2) == pytest.approx(float(ref), abs=1e-15)
    assert abs(c_np(1, 2) - 1 / 6) <= 1e-12


def test_c22_closed_form_vs_symbolic():
    # 2 |B_1| ∫_{B_1} |x|^2 = 2 π (π / 2), normalised by π^3
    ref = 2 * mpmath.pi * mpmath.quad(lambda r: 2 * mpmath.pi * r ** 3, [0, 1]) / mpmath.pi ** 3
    assert c_np(2, 2) == pytest.approx(float(ref), abs=1e-15)
    assert c_np(2, 2, "product-quadrature") == pytest.approx(1 / math.pi, abs=1e-12)


def test_c13_methods_agree():
    mc = c_np(1, 3, "monte-carlo", samples=10_000_000, seed=1)
    pq = c_np(1, 3, "product-quadrature")
    assert mc > 0
    assert abs(mc - pq) <= 1e-3
    assert pq == pytest.approx(0.1, abs=1e-13)  # 2 / (4 * 5)


def test_c23_frozen_and_monte_carlo():
    assert c_np(2, 3, "product-quadrature") == pytest.approx(C_2_3, abs=1e-12)
    assert c_np(2, 3, "monte-carlo", samples=2_000_000, seed=3) == pytest.approx(C_2_3, abs=2e-3)
    assert PowerLawParams(2, 3, 1).C == pytest.approx(C_2_3, abs=1e-12)


def test_c_np_errors():
    with pytest.raises(ValueError):
        c_np(3, 4)
    with pytest.raises(ValueError):
        c_np(2, 3, "closed-form")
    with pytest.raises(ValueError):
        c_np(1, 2, "simpson")


def test_params_validation():
    for bad in [(3, 4, 1), (2, 2, 1), (1, 2, 0), (1, 0.5, 1)]:
        with pytest.raises(ValueError):
            PowerLawParams(*bad)


def test_g_examples():
    assert ball_energy_g(P, 1) == pytest.approx(-5 / 6, abs=1e-15)
    assert ball_energy_g(P, 0) == 0
    assert ball_energy_g(P, 3) == pytest.approx(4.5, abs=1e-12)
    with pytest.raises(ValueError):
        ball_energy_g(PowerLawParams(1, 2, 1, a=1.0), 1.5)


def test_f_examples():
    assert split_derivative(P, 1.7, 0.5) == 0.0
    assert split_function_f(P, 1, 0) == pytest.approx(-5 / 6)
    with pytest.raises(ValueError):
        split_function_f(P, 1, 0.7)


def test_f_derivatives_finite_difference():
    m, t, e = 2.0, 0.3, 1e-5
    fd = (split_function_f(P, m, t + e) - split_function_f(P, m, t - e)) / (2 * e)
    assert split_derivative(P, m, t) == pytest.approx(fd, rel=1e-6)
    fd2 = (split_derivative(P, m, t + e) - split_derivative(P, m, t - e)) / (2 * e)
    assert split_second_derivative(P, m, t) == pytest.approx(fd2, rel=1e-6)


def test_thresholds_examples():
    th = split_thresholds(P)
    assert th.m0 == pytest.approx(math.sqrt(3), abs=1e-12)
    assert th.m1 == pytest.approx(2.0, abs=1e-12)
    assert split_thresholds(PowerLawParams(1, 2, 2)).m0 == pytest.approx(math.sqrt(6), abs=1e-12)


def test_best_split_cases():
    assert best_two_ball_split(P, 1.5)[0] == 0.0
    assert best_two_ball_split(P, 2.5)[0] == 0.5
    t, f = best_two_ball_split(P, 1.9)
    # f evaluated at 30 digits so the flat minimum is located well below 1e-8
    mpmath.mp.dps = 30
    C, m = mpmath.mpf(1) / 6, mpmath.mpf("1.9")
    g = lambda x: C * x ** 4 - x ** 2
    F = lambda s: g(s * m) + g((1 - s) * m)
    F0 = F(mpmath.mpf("0.2"))
    ref = golden_min(lambda s: float(F(mpmath.mpf(s)) - F0), 0.0, 0.5)
    mpmath.mp.dps = 15
    assert 0 < t < 0.5
    assert t == pytest.approx(ref, abs=1e-8)
    assert f == pytest.approx(split_function_f(P, 1.9, t), abs=1e-14)


def test_partition_examples():
    gm = optimal_partition(P, 1)
    assert gm.k == 1 and gm.masses == [1.0] and gm.total_energy == pytest.approx(-5 / 6)
    gm = optimal_partition(P, 2.1)
    assert gm.k == 2 and gm.masses == pytest.approx([1.05, 1.05], abs=1e-12)
    assert gm.total_energy == pytest.approx(-1.79983125, abs=1e-12)
    gm = optimal_partition(P, 4)
    assert gm.k == 3 and gm.masses == pytest.approx([4 / 3] * 3, abs=1e-9)
    assert gm.total_energy == pytest.approx(-3.7530864197530867, abs=1e-12)


def test_partition_matches_exhaustive_scan_at_4():
    g = g_power(1, 2, 1)
    best = math.inf
    for k in range(1, 9):
        for s in np.arange(1e-3, 4 / k + 1e-12, 1e-3):
            r = (4 - s) / (k - 1) if k > 1 else 4.0
            val = float(g(4.0)) if k == 1 else float((k - 1) * g(r) + g(s))
            best = min(best, val)
    assert optimal_partition(P, 4).total_energy <= best + 1e-12


def test_k_max_warning():
    with pytest.warns(RuntimeWarning):
        gm = optimal_partition(P, 10, k_max=2)
    assert gm.k_max_attained


def test_minimal_energy_examples():
    assert minimal_energy_E(P, 1) == pytest.approx(-5 / 6)
    assert minimal_energy_E(P, 2.1) == pytest.approx(-1.79983125)
    assert abs(minimal_energy_E(P, 1e-6)) < 1e-11


def test_linear_growth():
    m_star, lim = linear_growth_limit(P)
    assert m_star == pytest.approx(math.sqrt(2), abs=1e-12)
    assert lim == pytest.approx(-2 * math.sqrt(2) / 3, abs=1e-12)
    g = g_power(1, 2, 1)
    ref = golden_min(lambda m: float(g(m)) / m, 0.1, 3.0)
    assert m_star == pytest.approx(ref, abs=1e-6)
    assert abs(minimal_energy_E(P, 100) / 100 - lim) <= 0.01 * abs(lim)


def test_subadditivity_examples():
    rep = subadditivity_probe(P, 1, 1)
    assert rep.holds and rep.E_sum == pytest.approx(2 * (-5 / 6))
    rep = subadditivity_probe(P, 0.5, 0.5)
    assert rep.holds and rep.E_sum == pytest.approx(-5 / 6)
    assert rep.E_m + rep.E_n == pytest.approx(2 * (0.0625 / 6 - 0.25))


def test_partition_sweep_columns():
    rows = partition_sweep(P, [0.5, 1.0, 4.0])
    assert [r["k"] for r in rows] == [1, 1, 3]
    assert set(rows[0]) == {"m", "k", "total_energy", "energy_per_mass"}


# -- properties -------------------------------------------------------------------------

def test_g_second_single_sign_change():
    ms = np.geomspace(1e-3, 1e2, 2000)
    for params in (P, PowerLawParams(1, 3, 2), PowerLawParams(2, 3, 1), PowerLawParams(2, 4, 0.5)):
        s = np.sign(g_second(params, ms))
        assert s[0] < 0 and s[-1] > 0
        assert np.count_nonzero(np.diff(s)) == 1


@settings(max_examples=100, deadline=None)
@given(st.floats(1.01, 4.0), st.floats(0.01, 5.0))
def test_thresholds_ordered(p, d):
    th = split_thresholds(PowerLawParams(1, p, d))
    assert 0 < th.m0 < th.m1


@settings(max_examples=40, deadline=None)
@given(st.floats(1.5, 4.0), st.floats(0.1, 5.0), st.floats(0.1, 10.0))
def test_homogeneity(p, d, c):
    a, b = PowerLawParams(1, p, d), PowerLawParams(1, p, c * d)
    s = c ** (1 / p)
    ta, tb = split_thresholds(a), split_thresholds(b)
    assert tb.m0 == pytest.approx(s * ta.m0, rel=1e-12)
    assert tb.m1 == pytest.approx(s * ta.m1, rel=1e-12)
    assert linear_growth_limit(b)[0] == pytest.approx(s * linear_growth_limit(a)[0], rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.1, 4.0), st.floats(0.2, 3.0), st.floats(0.2, 8.0))
def test_f_prime_concave(p, d, m):
    params = PowerLawParams(1, p, d)
    ts = np.linspace(0.0, 0.5, 201)
    fp = np.array([split_derivative(params, m, t) for t in ts])
    second = fp[2:] - 2 * fp[1:-1] + fp[:-2]
    assert np.all(second <= 1e-9 * max(1.0, np.abs(fp).max()))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 10.0))
def test_partition_structure(m):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gm = optimal_partition(P, m)
    assert sum(gm.masses) == pytest.approx(m, abs=1e-9)
    dist = gm.distinct_masses(1e-6)
    assert len(dist) <= 2
    if len(dist) == 2:
        assert sum(1 for x in gm.masses if abs(x - dist[0]) <= 1e-6) == 1
    assert gm.total_energy <= ball_energy_g(P, m) + 1e-15
    m1 = split_thresholds(P).m1
    big = [x for x in gm.masses if abs(x - max(gm.masses)) <= 1e-6]
    if len(big) >= 2:
        assert 2 * big[0] >= m1 - 1e-6
    if len(dist) == 2:
        assert dist[0] + dist[1] <= m1 + 1e-6


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(0.01, 10.0))
def test_subadditivity_random(m, n):
    assert subadditivity_probe(P, m, n).holds


def test_structure_free_oracle_small():
    g = g_power(1, 2, 1)
    rng = np.random.default_rng(5)
    for m in rng.uniform(0.5, 6.0, 4):
        ours = minimal_energy_E(P, m)
        for k in (2, 3):
            val, _ = simplex_oracle(g, m, k, starts=10, seed=int(1000 * m) + k)
            assert val >= ours - 1e-7
