import math

import numpy as np
import pytest

from nashlab.inequalities import (
    build_path,
    hls_ratio,
    isoperimetric_ratio,
    maximal_Mq,
    nash_exponents,
    nash_ratio,
    opt_lemma,
    path_count,
    poincare_sobolev_ratio,
    function_corpus,
    theta_c,
)
from nashlab.lattice import EdgeField, LatticeGeometry, SiteFunction

from oracles import (
    enumerate_box_subsets_isoperimetric,
    grid_search_infimum,
    reference_path,
    segment_distance,
)


def test_theta_c_values():
    assert theta_c(2, 4, 8) == 0.2
    assert theta_c(2, 4, math.inf) == 0.0
    assert theta_c(3, 6, 6) == pytest.approx(4.0 / 9.0, rel=1e-15)
    with pytest.raises(ValueError):
        theta_c(2, 2, 8)
    with pytest.raises(ValueError):
        theta_c(2, 4, 2)


def test_exponent_values():
    e = nash_exponents(2, 4, 8, 1.0)
    assert (e.alpha, e.beta, e.gamma) == pytest.approx((2 / 3, 0.0, 1 / 3), abs=1e-15)
    e = nash_exponents(2, 4, 8, 0.2)
    assert (e.alpha, e.beta, e.gamma) == pytest.approx((8 / 15, 2 / 5, 1 / 15), rel=1e-14)
    # barycentric identity at the worked example
    assert 2 * e.beta + 3 * e.gamma == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(ValueError):
        nash_exponents(2, 4, 8, 0.0)


def test_exponent_identities_random():
    rng = np.random.default_rng(10)
    for _ in range(2000):
        d = int(rng.integers(1, 4))
        p = d + float(rng.uniform(0.1, 16))
        q = math.inf if rng.random() < 0.1 else d + float(rng.uniform(0.1, 40))
        tc = theta_c(d, p, q)
        theta = tc + (1.0 - tc) * float(rng.random())
        e = nash_exponents(d, p, q, theta)
        assert abs(e.alpha + e.beta + e.gamma - 1.0) <= 1e-12
        bary = (d + 2) / 2 * e.beta + (p + 2) / 2 * e.gamma
        assert abs(bary - 1.0) <= 1e-12
        lhs = e.alpha - e.gamma * (p - d) / 2
        assert abs(lhs - d / 2 * (1 - e.alpha)) <= 1e-12


def test_maximal_mq():
    g = LatticeGeometry(1, 3)
    assert maximal_Mq(EdgeField.constant(g, 1.0), 2) == 1.0
    assert maximal_Mq(EdgeField.constant(g, 1.0), math.inf) == 1.0
    for q in (2, 5, math.inf):
        assert maximal_Mq(EdgeField.constant(g, 0.25), q) == pytest.approx(4.0, rel=1e-12)
    # one weak edge inside the innermost box dominates at r=1
    vals = np.ones(g.n_edges)
    inner = np.nonzero(g.edge_radius == 1)[0]
    assert inner.size == 2
    vals[inner[0]] = 0.5
    got = maximal_Mq(EdgeField(g, vals), 2)
    assert got == pytest.approx(math.sqrt(2.5), rel=1e-12)
    vals[inner[0]] = 0.0
    assert maximal_Mq(EdgeField(g, vals), 2) == math.inf


def test_maximal_mq_monotone():
    g = LatticeGeometry(2, 4)
    rng = np.random.default_rng(4)
    w = rng.uniform(0.05, 1.0, g.n_edges)
    w2 = np.minimum(1.0, w + rng.uniform(0, 0.5, g.n_edges))
    for q in (3, 8, math.inf):
        assert maximal_Mq(EdgeField(g, w), q) >= maximal_Mq(EdgeField(g, w2), q)


def test_nash_ratio_delta_closed_form():
    for d in (1, 2, 3):
        g = LatticeGeometry(d, 3)
        f = SiteFunction.delta(g)
        w = EdgeField.constant(g, 1.0)
        e = nash_exponents(d, d + 2.0, d + 4.0, 0.7)
        got = nash_ratio(f, w, e)
        assert got == pytest.approx((2.0 * d) ** (-e.alpha / 2.0), rel=1e-12)


def test_nash_ratio_scale_invariant():
    g = LatticeGeometry(2, 6)
    rng = np.random.default_rng(6)
    f = SiteFunction(g, rng.random(g.n_sites))
    w = EdgeField(g, rng.uniform(0.2, 1.0, g.n_edges))
    e = nash_exponents(2, 4, 8, 0.4)
    base = nash_ratio(f, w, e)
    for lam in (1e-3, 0.37, 210.0):
        scaled = nash_ratio(SiteFunction(g, lam * f.values), w, e)
        assert scaled == pytest.approx(base, rel=1e-10)
    with pytest.raises(ValueError):
        nash_ratio(SiteFunction(g, np.zeros(g.n_sites)), w, e)


def test_poincare_sobolev():
    g = LatticeGeometry(2, 4)
    const = SiteFunction(g, np.full(g.n_sites, 2.0))
    assert poincare_sobolev_ratio(const, 4, 1.5) == 0.0
    rng = np.random.default_rng(7)
    f = SiteFunction(g, rng.random(g.n_sites))
    r = poincare_sobolev_ratio(f, 4, 1.5)
    assert 0 < r < math.inf
    with pytest.raises(ValueError):
        poincare_sobolev_ratio(f, 4, 2.5)


def test_isoperimetric_single_site():
    g = LatticeGeometry(2, 3)
    A = np.zeros(g.n_sites, dtype=bool)
    A[g.origin] = True
    assert isoperimetric_ratio(A, g, 1) == pytest.approx(0.25)
    assert isoperimetric_ratio(np.zeros(g.n_sites, dtype=bool), g, 1) == 0.0


def test_isoperimetric_exhaustive_b1():
    # oracle enumerates all 2^9 subsets of B_1 independently
    oracle_sup = enumerate_box_subsets_isoperimetric(1)
    g = LatticeGeometry(2, 1)
    best = 0.0
    for mask in range(1, 2**9):
        A = np.array([(mask >> i) & 1 for i in range(9)], dtype=bool)
        if A.sum() > 4:
            continue
        best = max(best, isoperimetric_ratio(A, g, 1))
    assert best == pytest.approx(oracle_sup, rel=1e-12)
    assert best == pytest.approx(math.sqrt(3.0) / 3.0, rel=1e-12)


def test_build_path_axis():
    assert build_path((0, 0), (2, 0)) == [(0, 0), (1, 0), (2, 0)]
    assert build_path((1, -1), (1, -1)) == [(1, -1)]


def test_build_path_properties():
    rng = np.random.default_rng(8)
    for _ in range(50):
        d = int(rng.integers(1, 4))
        x = rng.integers(-6, 7, d)
        y = rng.integers(-6, 7, d)
        p = build_path(x, y)
        assert len(set(p)) == len(p)
        assert len(p) == int(np.abs(y - x).sum()) + 1
        for z in p:
            assert segment_distance(z, x, y) <= math.sqrt(d) + 1e-9
        assert p == reference_path(x, y)


def test_path_count_bound():
    # exhaustive constant frozen from enumeration at r <= 8 (max 8.0 at r=3)
    r = 4
    g_sites = [(-r + i, -r + j) for i in range(2 * r + 1) for j in range(2 * r + 1)]
    rng = np.random.default_rng(9)
    for _ in range(12):
        x = tuple(rng.integers(-r, r + 1, 2))
        tail = tuple(rng.integers(-r, r, 2))
        axis = int(rng.integers(0, 2))
        head = (tail[0] + 1, tail[1]) if axis == 0 else (tail[0], tail[1] + 1)
        cnt = path_count((tail, head), x, r)
        k = math.dist(x, tail)
        assert cnt <= 8.0 * r * (r / (1.0 + k)) + 1e-9
    assert path_count((((0, 0)), (1, 0)), (0, 0), 2) >= 1


def test_opt_lemma_worked_example():
    r, R, bound = opt_lemma(1, 1, 1, 1, 1, 1, 1)
    assert (r, R) == pytest.approx((1.0, 1.0))
    assert bound == pytest.approx(3.0)
    inf = grid_search_infimum(1, 1, 1, 1, 1, 1, 1)
    assert inf == pytest.approx(3.0, rel=1e-4)


def test_opt_lemma_zero_coefficient():
    r, R, bound = opt_lemma(1, 2, 3, 4, 0.0, 5.0, 6.0)
    assert bound == 0.0 and r is None and R is None


def test_opt_lemma_matches_nash_exponents():
    d, p, q = 2, 4.0, 8.0
    a, ap, b, c = d / q, 1 - d / q, d / 2, p / 2
    sigma = a * b + ap * c + b * c
    e = nash_exponents(d, p, q, theta_c(d, p, q))
    assert b * c / sigma == pytest.approx(e.alpha, rel=1e-13)
    assert ap * c / sigma == pytest.approx(e.beta, rel=1e-13)
    assert a * b / sigma == pytest.approx(e.gamma, rel=1e-13)


def test_opt_lemma_terms_equal_and_bound_brackets_infimum():
    rng = np.random.default_rng(11)
    for _ in range(60):
        a, ap, b, c = rng.uniform(0.2, 3.0, 4)
        A, B, D = rng.uniform(0.01, 10.0, 3)
        r, R, bound = opt_lemma(a, ap, b, c, A, B, D)
        t1 = R**a * r**ap * A
        t2 = r**-b * B
        t3 = R**-c * D
        m = max(t1, t2, t3)
        assert abs(t1 - t2) <= 1e-10 * m and abs(t2 - t3) <= 1e-10 * m
        inf = grid_search_infimum(a, ap, b, c, A, B, D)
        assert bound >= inf * (1.0 - 1e-4)
        assert bound <= 3.0 * inf


def test_hls_ratio_finite():
    g = LatticeGeometry(2, 8)
    rng = np.random.default_rng(12)
    f = SiteFunction(g, rng.random(g.n_sites))
    r = hls_ratio(f, 8)
    assert 0 < r < math.inf
    const = SiteFunction(g, np.ones(g.n_sites))
    assert hls_ratio(const, 8) == 0.0


def test_corpus_deterministic_and_l_stable():
    g32 = LatticeGeometry(2, 32)
    c1 = function_corpus(g32, 30, 99)
    c2 = function_corpus(g32, 30, 99)
    for (f1, d1), (f2, d2) in zip(c1, c2):
        assert d1 == d2
        assert np.array_equal(f1.values, f2.values)
    # the same seed at doubled L produces the same functions padded out
    g64 = LatticeGeometry(2, 64)
    c3 = function_corpus(g64, 30, 99)
    for (f_small, d1), (f_big, d2) in zip(c1, c3):
        assert d1 == d2
        sel = g64.site_radius <= 32
        small_on_big = np.zeros(g64.n_sites)
        small_on_big[sel] = f_small.values
        inner = g64.site_radius <= 16
        assert np.allclose(small_on_big[inner], f_big.values[inner], atol=1e-12)


def test_nash_constant_stability_under_doubling_smoke():
    e = nash_exponents(2, 4, 8, 0.6)
    sups = []
    for L in (16, 32):
        g = LatticeGeometry(2, L)
        w = EdgeField.constant(g, 1.0)
        corpus = function_corpus(g, 60, 123)
        sups.append(max(nash_ratio(f, w, e) for f, _ in corpus))
    assert sups[1] <= 1.10 * sups[0]
