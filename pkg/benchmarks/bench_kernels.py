"""Benchmark the numba kernels against the pure-numpy fallback.

Times the three hot spots on representative problem sizes and prints a
table with per-call medians and the speedup.  Run as

    python benchmarks/bench_kernels.py

The active backend for library calls is chosen by NASHLAB_BACKEND; this
script always times both implementations explicitly (numba first call is
excluded as compilation warmup).
"""

import time

import numpy as np

from nashlab.environments import env_from_exclusion, exclusion_simulate
from nashlab.kernels import BACKEND, get_impl
from nashlab.lattice import LatticeGeometry


def _median_time(fn, repeats=7):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return sorted(times)[len(times) // 2]


def bench_advance(L=16, tau=0.5, repeats=9):
    g = LatticeGeometry(2, L)
    rng = np.random.default_rng(0)
    a = (rng.random(g.n_edges) < 0.25).astype(np.float64)
    sr = np.bincount(g.edge_tail, a, minlength=g.n_sites) + np.bincount(
        g.edge_head, a, minlength=g.n_sites
    )
    u = np.zeros(g.n_sites)
    u[g.origin] = 1.0
    rows = []
    for name in _backends():
        fn = get_impl(name)["advance_interval"]
        call = lambda: fn(g.edge_tail, g.edge_head, a, sr, u, 4.0, tau, 1e-12)
        call()  # warmup / compile
        rows.append((name, _median_time(call, repeats)))
    return f"uniformization step (d=2, L={L}, mu*tau={4 * tau:g})", rows


def bench_weights(L=16, T=50.0, repeats=3):
    traj = exclusion_simulate(0.5, 2, L, T, 7)
    env = env_from_exclusion(traj)
    ptr, starts, vals = env.all_pieces()
    grid = np.linspace(0.0, T, 101)
    rows = []
    for name in _backends():
        fn = get_impl(name)["weight_integrals"]
        call = lambda: fn(ptr, starts, vals, T, grid, 4.0)
        call()
        rows.append((name, _median_time(call, repeats)))
    return f"weight integrals ({env.n_events} events, 101 grid times)", rows


def bench_replay(L=16, T=50.0, repeats=3):
    traj = exclusion_simulate(0.5, 2, L, T, 7)
    torus = traj.torus
    box = LatticeGeometry(torus.d, torus.L)
    ptr, inc = box.incident_box_edges()
    occ0 = traj.initial
    a0 = ((occ0[box.edge_tail] == 0) & (occ0[box.edge_head] == 0)).astype(np.float64)
    rows = []
    for name in _backends():
        fn = get_impl(name)["exclusion_env_replay"]
        call = lambda: fn(traj.times, traj.edges, occ0.copy(), torus.edge_tail,
                          torus.edge_head, ptr, inc, box.edge_tail,
                          box.edge_head, a0.copy())
        call()
        rows.append((name, _median_time(call, repeats)))
    return f"exclusion replay ({traj.times.size} rings)", rows


def _backends():
    names = ["numpy"]
    try:
        get_impl("numba")
        names.insert(0, "numba")
    except KeyError:
        pass
    return names


def main():
    print(f"active library backend: {BACKEND}")
    for title, rows in (bench_advance(), bench_weights(), bench_replay()):
        print(f"\n{title}")
        base = dict(rows).get("numpy")
        for name, t in rows:
            speed = f"  ({base / t:.1f}x vs numpy)" if name == "numba" and base else ""
            print(f"  {name:6s} {t * 1e3:9.3f} ms{speed}")


if __name__ == "__main__":
    main()
