import numpy as np
import pytest

from nashlab.environments import (
    DynamicEnvironment,
    iid_static,
    resampling_env,
)
from nashlab.heat import (
    IntegratorConfig,
    dirichlet_energy,
    dissipation_check,
    evolve_dynamic,
    evolve_static,
    moment_N,
    reversal_check,
)
from nashlab.kernels import get_impl, BACKEND
from nashlab.lattice import EdgeField, LatticeGeometry, SiteFunction

from oracles import free_walk_energy, free_walk_p00


CFG = IntegratorConfig(dt=0.25)


def test_free_walk_bessel_d1():
    env = iid_static(1, 24, "constant:1", 0)
    tr = evolve_static(env, None, 1.0, CFG)
    assert tr.value("p00", 1.0) == pytest.approx(free_walk_p00(1, 1.0), abs=1e-6)
    assert free_walk_p00(1, 1.0) == pytest.approx(0.308508, abs=1e-6)


def test_free_walk_bessel_d2():
    env = iid_static(2, 16, "constant:1", 0)
    tr = evolve_static(env, None, 1.0, CFG)
    assert tr.value("p00", 1.0) == pytest.approx(free_walk_p00(2, 1.0), abs=1e-6)
    # energy matches the 2t return probability
    assert tr.value("E", 1.0) == pytest.approx(free_walk_energy(2, 1.0), abs=1e-6)


def test_frozen_environment():
    g = LatticeGeometry(2, 3)
    env = DynamicEnvironment.static(g, np.zeros(g.n_edges), 4.0)
    tr = evolve_dynamic(env, 0.0, None, 4.0, CFG)
    assert np.all(tr.p00 == 1.0)
    assert np.all(tr.mass == 1.0)


def test_conservation_positivity_monotonicity():
    env = iid_static(2, 10, "power:5", 3)
    tr = evolve_static(env, None, 6.0, CFG, snapshot_times=(3.0,))
    tr.validate()
    assert tr.mass_defect.max() <= 1e-6
    assert np.all(tr.snapshot(3.0) >= 0.0)
    assert np.all(np.diff(tr.E) <= 1e-9)
    assert np.all(np.diff(tr.lam) >= 0.0)


def test_delta_quantities():
    g = LatticeGeometry(2, 4)
    u = SiteFunction.delta(g)
    a = EdgeField.constant(g, 1.0)
    assert dirichlet_energy(a, u) == 4.0  # 2d at the origin
    for p in (2.0, 4.0, 7.5):
        assert moment_N(u, p) == 1.0


def test_dynamic_constant_matches_static():
    g = LatticeGeometry(2, 8)
    vals = np.random.default_rng(4).uniform(0.2, 1.0, g.n_edges)
    env = DynamicEnvironment.static(g, vals, 3.0)
    tr_dyn = evolve_dynamic(env, 0.0, None, 3.0, CFG)
    tr_stat = evolve_static(EdgeField(g, vals), None, 3.0, CFG)
    assert np.allclose(tr_dyn.E, tr_stat.E, rtol=1e-10)
    assert np.allclose(tr_dyn.p00, tr_stat.p00, rtol=1e-10)


def test_closed_then_open_composition():
    # all edges closed on [0,1], then open: the profile at 1+s matches a
    # free walk run for time s
    g = LatticeGeometry(2, 10)
    n = g.n_edges
    env = DynamicEnvironment(
        g,
        np.zeros(n),
        np.full(n, 1.0),
        np.arange(n, dtype=np.int64),
        np.ones(n),
        3.0,
    )
    tr = evolve_dynamic(env, 0.0, None, 3.0, CFG, snapshot_times=(1.0, 3.0))
    assert tr.value("p00", 1.0) == 1.0
    free = evolve_static(EdgeField.constant(g, 1.0), None, 2.0, CFG, snapshot_times=(2.0,))
    assert np.allclose(tr.snapshot(3.0), free.snapshot(2.0), atol=1e-9)


def test_trap_scenario():
    # isolate origin and one neighbour; walk settles to 1/2 on the pair;
    # then isolate the neighbour and open everything else: mass at the
    # origin escapes; finally restore the isolated pair: p00 climbs back
    # toward about 1/4
    g = LatticeGeometry(2, 8)
    z = g.site_index([1, 0])
    pair_edge = int(
        np.nonzero((g.edge_tail == g.origin) & (g.edge_head == z))[0][0]
    )
    z_edges = np.nonzero((g.edge_tail == z) | (g.edge_head == z))[0]
    a_phase1 = np.zeros(g.n_edges)
    a_phase1[pair_edge] = 1.0
    t1, t2, T = 6.0, 26.0, 34.0
    times, edges, vals = [], [], []
    # phase 2: open all but the neighbour's edges
    for e in range(g.n_edges):
        target = 0.0 if e in set(z_edges.tolist()) else 1.0
        if a_phase1[e] != target:
            times.append(t1)
            edges.append(e)
            vals.append(target)
    # phase 3: restore the pair
    for e in range(g.n_edges):
        target = a_phase1[e]
        before = 0.0 if e in set(z_edges.tolist()) else 1.0
        if before != target:
            times.append(t2)
            edges.append(e)
            vals.append(target)
    order = np.argsort(np.array(times), kind="stable")
    env = DynamicEnvironment(
        g,
        a_phase1,
        np.array(times)[order],
        np.array(edges, dtype=np.int64)[order],
        np.array(vals)[order],
        T,
    )
    tr = evolve_dynamic(env, 0.0, None, T, IntegratorConfig(dt=0.5))
    p_end_phase1 = tr.value("p00", t1)
    p_min_phase2 = tr.p00[(tr.times > t1) & (tr.times <= t2)].min()
    p_final = tr.value("p00", T)
    assert abs(p_end_phase1 - 0.5) < 1e-4
    assert p_min_phase2 < 0.05
    assert 0.15 < p_final < 0.30
    assert p_final > 2 * p_min_phase2


def test_static_symmetry_dense():
    g = LatticeGeometry(2, 2)
    vals = np.random.default_rng(5).uniform(0.1, 1.0, g.n_edges)
    fld = EdgeField(g, vals)
    n = g.n_sites
    P = np.empty((n, n))
    for x in range(n):
        tr = evolve_static(fld, x, 1.5, IntegratorConfig(dt=1.5), snapshot_times=(1.5,))
        P[x] = tr.snapshot(1.5)
    assert np.abs(P - P.T).max() <= 1e-10


def test_chapman_kolmogorov_dynamic_dense():
    g = LatticeGeometry(2, 2)
    env = resampling_env(2, 2, "power:4", 1.0, 2.0, 17)
    n = g.n_sites
    cfg = IntegratorConfig(dt=1.0)
    P_full = np.empty((n, n))
    P_first = np.empty((n, n))
    P_second = np.empty((n, n))
    for x in range(n):
        tr = evolve_dynamic(env, 0.0, x, 2.0, cfg, snapshot_times=(2.0,))
        P_full[x] = tr.snapshot(2.0)
        tr1 = evolve_dynamic(env, 0.0, x, 1.0, cfg, snapshot_times=(1.0,))
        P_first[x] = tr1.snapshot(1.0)
        tr2 = evolve_dynamic(env, 1.0, x, 2.0, cfg, snapshot_times=(1.0,))
        P_second[x] = tr2.snapshot(1.0)
    assert np.abs(P_first @ P_second - P_full).max() <= 1e-9


def test_reversal_static_symmetry():
    g = LatticeGeometry(2, 3)
    vals = np.random.default_rng(6).uniform(0.1, 1.0, g.n_edges)
    env = DynamicEnvironment.static(g, vals, 2.0)
    x, y = g.site_index([1, 1]), g.site_index([-1, 0])
    fwd, bwd = reversal_check(env, 2.0, x, y)
    assert fwd == pytest.approx(bwd, abs=1e-10)


def test_reversal_t0():
    g = LatticeGeometry(2, 3)
    env = DynamicEnvironment.static(g, np.ones(g.n_edges), 1.0)
    assert reversal_check(env, 0.0, 3, 3) == (1.0, 1.0)
    assert reversal_check(env, 0.0, 3, 4) == (0.0, 0.0)


def test_reversal_random_envs():
    rng = np.random.default_rng(7)
    g = LatticeGeometry(2, 4)
    for trial in range(10):
        n_ev = 10
        t_ev = np.sort(rng.uniform(0.02, 0.98, n_ev))
        e_ev = rng.integers(0, g.n_edges, n_ev)
        v_ev = rng.random(n_ev)
        env = DynamicEnvironment(g, rng.random(g.n_edges), t_ev, e_ev, v_ev, 1.0)
        x = int(rng.integers(0, g.n_sites))
        y = int(rng.integers(0, g.n_sites))
        fwd, bwd = reversal_check(env, 1.0, x, y)
        assert abs(fwd - bwd) <= 1e-8


def test_dissipation_identity_static():
    env = iid_static(2, 10, "power:6", 8)
    checks = dissipation_check(
        DynamicEnvironment.static(env.geometry, env.field.values, 8.0),
        None, 8.0, CFG, n_times=20, seed=1,
    )
    assert len(checks) == 20
    for _, fd, target in checks:
        assert abs(fd - target) <= 1e-5 * abs(target)


def test_dissipation_identity_dynamic():
    env = resampling_env(2, 6, "power:6", 0.4, 10.0, 9)
    checks = dissipation_check(env, None, 10.0, CFG, n_times=10, seed=2)
    for _, fd, target in checks:
        assert abs(fd - target) <= 1e-5 * abs(target)


def test_wrap_moment_growth_ratio_stable():
    # d/dt N_t <= C N^{(p-2)/p} E^{2/p}: the finite-difference ratio stays
    # bounded and stable under box doubling
    maxima = []
    for L in (8, 16):
        env = iid_static(2, L, "power:6", 10)
        tr = evolve_static(env, None, 8.0, IntegratorConfig(dt=0.25))
        dN = np.gradient(tr.N, tr.times)
        sel = tr.times >= 1.0
        ratio = dN[sel] / (tr.N[sel] ** ((CFG.p - 2) / CFG.p) * tr.E[sel] ** (2 / CFG.p))
        maxima.append(ratio.max())
        assert np.isfinite(ratio).all()
    assert maxima[1] <= 1.25 * maxima[0] + 1e-9


def test_off_diagonal_moment_bound():
    # N_t <= C Lambda_t t^{(p-d)/2} with C stable over the horizon
    env = iid_static(2, 16, "power:6", 11)
    tr = evolve_static(env, None, 20.0, IntegratorConfig(dt=0.5))
    sel = tr.times >= 1.0
    t = tr.times[sel]
    C = tr.N[sel] / (tr.lam[sel] * t ** ((CFG.p - 2.0) / 2.0))
    first = C[: C.size // 2].max()
    second = C[C.size // 2 :].max()
    assert np.isfinite(C).all()
    assert second <= 1.25 * first


def test_mass_alarm_flags():
    g = LatticeGeometry(1, 2)
    env = DynamicEnvironment.static(g, np.ones(g.n_edges), 30.0)
    tr = evolve_dynamic(env, 0.0, None, 30.0, IntegratorConfig(dt=1.0, boundary_alarm=1e-3))
    assert any("boundary" in a for a in tr.alarms)


def test_backends_agree():
    g = LatticeGeometry(2, 5)
    rng = np.random.default_rng(12)
    a = rng.uniform(0.0, 1.0, g.n_edges)
    sr = np.bincount(g.edge_tail, a, minlength=g.n_sites) + np.bincount(
        g.edge_head, a, minlength=g.n_sites
    )
    u = rng.random(g.n_sites)
    u /= u.sum()
    impls = [get_impl("numpy")]
    if BACKEND == "numba":
        impls.append(get_impl("numba"))
    outs = [
        impl["advance_interval"](g.edge_tail, g.edge_head, a, sr, u, 4.0, 0.9, 1e-12)
        for impl in impls
    ]
    for o in outs[1:]:
        assert np.abs(o - outs[0]).max() <= 1e-14
    assert outs[0].min() >= 0.0
    assert outs[0].sum() == pytest.approx(1.0, abs=1e-12)


def test_trace_csv_dump(tmp_path):
    env = iid_static(2, 4, "constant:1", 0)
    tr = evolve_static(env, None, 1.0, IntegratorConfig(dt=0.5), snapshot_times=(1.0,))
    p = tmp_path / "trace.csv"
    tr.dump_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "t,E,D,N,lambda,p00,mass_defect"
    assert len(lines) == tr.times.size + 1
    sp = tmp_path / "snap.csv"
    tr.dump_snapshot_csv(1.0, sp)
    assert sp.read_text().splitlines()[0] == "x1,x2,value"
