import math

import numpy as np
import pytest
from scipy import stats

from nashlab.environments import (
    DynamicEnvironment,
    env_from_exclusion,
    exclusion_simulate,
    iid_static,
    parse_law,
    resampling_env,
    time_reverse,
)
from nashlab.lattice import LatticeGeometry


def test_parse_law():
    assert parse_law("constant:0.5") == ("constant", 0.5)
    assert parse_law("power:6") == ("power", 6.0)
    with pytest.raises(ValueError):
        parse_law("gamma:2")
    with pytest.raises(ValueError):
        parse_law("power:-1")


def test_constant_law():
    env = iid_static(2, 3, "constant:1", 0)
    assert np.all(env.field.values == 1.0)


def test_power_law_moments():
    # E[a^-2] = eta/(eta-2) = 1.5 for eta = 6; P[a <= 0.5] = 0.5^6
    eta = 6.0
    env = iid_static(2, 112, "power:6", 42)  # ~ 1e5 edges
    a = env.field.values
    n = a.size
    assert n >= 10**5
    assert np.all((a > 0) & (a <= 1))
    inv2 = a**-2.0
    se = inv2.std(ddof=1) / math.sqrt(n)
    assert abs(inv2.mean() - 1.5) <= 3 * se
    p_emp = (a <= 0.5).mean()
    p_true = 0.5**eta
    se_p = math.sqrt(p_true * (1 - p_true) / n)
    assert abs(p_emp - p_true) <= 3 * se_p


def test_static_reproducible():
    a = iid_static(2, 5, "power:4", 7).field.values
    b = iid_static(2, 5, "power:4", 7).field.values
    assert np.array_equal(a, b)
    c = iid_static(2, 5, "power:4", 8).field.values
    assert not np.array_equal(a, c)


def test_exclusion_empty_density():
    traj = exclusion_simulate(0.0, 2, 3, 5.0, 0)
    assert traj.n_particles == 0
    env = env_from_exclusion(traj)
    assert np.all(env.initial == 1.0)
    assert env.n_events == 0


def test_exclusion_conserves_particles():
    traj = exclusion_simulate(0.4, 2, 4, 10.0, 3)
    for t in (0.0, 3.3, 10.0):
        assert traj.occupancy_at(t).sum() == traj.n_particles


def test_exclusion_deterministic():
    t1 = exclusion_simulate(0.5, 2, 4, 5.0, 12)
    t2 = exclusion_simulate(0.5, 2, 4, 5.0, 12)
    assert np.array_equal(t1.times, t2.times)
    assert np.array_equal(t1.edges, t2.edges)
    assert np.array_equal(t1.initial, t2.initial)


def test_exclusion_prefix_stable_in_horizon():
    short = exclusion_simulate(0.5, 2, 4, 5.0, 12)
    long = exclusion_simulate(0.5, 2, 4, 20.0, 12)
    n = short.times.size
    assert np.array_equal(short.times, long.times[:n])
    assert np.array_equal(short.edges, long.edges[:n])


def test_single_particle_environment():
    # a lone particle closes exactly the 2d edges meeting its site
    torus = LatticeGeometry(2, 3, periodic=True)
    traj = exclusion_simulate(0.0, 2, 3, 1.0, 1)
    x0 = torus.site_index([1, -1])
    occ = traj.initial.copy()
    occ[x0] = 1
    traj2 = exclusion_simulate(0.0, 2, 3, 1.0, 1)
    object.__setattr__(traj2, "initial", occ)
    env = env_from_exclusion(traj2)
    box = env.geometry
    closed = np.nonzero(env.initial == 0.0)[0]
    incident = [
        e
        for e in range(box.n_edges)
        if x0 in (box.edge_tail[e], box.edge_head[e])
    ]
    assert sorted(closed) == sorted(incident)
    assert len(incident) == 4


def test_exclusion_env_values_binary_and_event_counts():
    traj = exclusion_simulate(0.5, 2, 4, 8.0, 5)
    env = env_from_exclusion(traj)
    assert set(np.unique(env.values)).issubset({0.0, 1.0})
    assert set(np.unique(env.initial)).issubset({0.0, 1.0})
    assert env.n_events <= 8 * traj.times.size
    # per-edge event times strictly increasing
    for e in np.unique(env.edges[:200]):
        te = env.times[env.edges == e]
        assert np.all(np.diff(te) > 0)


def test_exclusion_stationary_marginal():
    # chi-square on the occupancy of a fixed site at the horizon: the
    # Bernoulli(rho) marginal is preserved (200 independent runs)
    rho, seeds = 0.5, 200
    hits = 0
    for i in range(seeds):
        traj = exclusion_simulate(rho, 2, 3, 2.0, 777, realization=i)
        hits += int(traj.occupancy_at(2.0)[traj.torus.origin])
    chi = stats.chisquare([seeds - hits, hits], [seeds * (1 - rho), seeds * rho])
    assert chi.pvalue > 0.01


def test_exclusion_site_time_average():
    # time-averaged occupancy across seeds approximates rho
    rho, seeds = 0.5, 200
    vals = np.array([
        exclusion_simulate(rho, 2, 8, 25.0, 31, realization=i).site_time_average(0)
        for i in range(seeds)
    ])
    se = vals.std(ddof=1) / math.sqrt(seeds)
    assert abs(vals.mean() - rho) <= 3 * se


def test_env_value_at_piecewise_constant():
    g = LatticeGeometry(1, 2)
    env = DynamicEnvironment(
        g,
        np.full(g.n_edges, 1.0),
        np.array([1.0, 2.0]),
        np.array([0, 0]),
        np.array([0.25, 0.75]),
        3.0,
    )
    assert env.value_at(0.0)[0] == 1.0
    assert env.value_at(0.999)[0] == 1.0
    assert env.value_at(1.0)[0] == 0.25  # right-continuous
    assert env.value_at(1.5)[0] == 0.25
    assert env.value_at(2.5)[0] == 0.75
    with pytest.raises(ValueError):
        env.value_at(3.5)


def test_time_reverse_constant_env():
    g = LatticeGeometry(2, 2)
    env = DynamicEnvironment.static(g, np.full(g.n_edges, 0.6), 4.0)
    rev = time_reverse(env, 4.0)
    assert rev.n_events == 0
    assert np.array_equal(rev.initial, env.initial)


def test_time_reverse_single_event():
    g = LatticeGeometry(1, 1)
    env = DynamicEnvironment(
        g, np.ones(g.n_edges), np.array([0.3]), np.array([1]), np.array([0.0]), 1.0
    )
    rev = time_reverse(env, 1.0)
    assert rev.initial[1] == 0.0
    assert rev.times.tolist() == [0.7]
    assert rev.values.tolist() == [1.0]


def test_time_reverse_involution():
    env = resampling_env(2, 3, "power:5", 1.0, 4.0, 21)
    for t in (4.0, 2.5):
        sub = time_reverse(time_reverse(env, t), t)
        keep = env.times < t
        assert np.allclose(sub.initial, env.initial)
        assert np.allclose(sub.times, env.times[keep])
        assert np.array_equal(sub.edges, env.edges[keep])
        assert np.allclose(sub.values, env.values[keep])


def test_time_reverse_pointwise_values():
    env = resampling_env(2, 3, "power:5", 0.7, 5.0, 33)
    t = 4.2
    rev = time_reverse(env, t)
    rng = np.random.default_rng(0)
    for s in rng.uniform(0, t, 25):
        # avoid sampling exactly at an event time: generic s
        assert np.allclose(rev.value_at(s), env.value_at(t - s))


def test_trajectory_and_env_dump(tmp_path):
    traj = exclusion_simulate(0.5, 2, 3, 2.0, 1)
    env = env_from_exclusion(traj)
    p1 = tmp_path / "traj.csv"
    p2 = tmp_path / "env.csv"
    traj.dump_csv(p1)
    env.dump_csv(p2)
    header = p1.read_text().splitlines()[0]
    assert header == "time,edge_id,new_value"
    assert p2.read_text().splitlines()[0] == "time,edge_id,new_value"
    assert len(p2.read_text().splitlines()) == env.n_events + 1
