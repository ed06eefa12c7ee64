"""Hot numerical kernels with a numba fast path and a pure-numpy fallback.

The backend is selected once at import time from the environment variable
``NASHLAB_BACKEND``:

* unset or ``numba``  -- JIT kernels (falls back to numpy with a warning
  if numba cannot be imported; errors out if numba was requested
  explicitly),
* ``numpy``           -- vectorised/bincount implementations.

Both paths implement the same accumulation order, so results agree to
machine precision; per-backend runs are bit-reproducible.  The three hot
spots are the uniformization step of the master-equation integrator, the
time-kernel weight integrals, and the exclusion-process environment
replay.  ``benchmarks/bench_kernels.py`` times the two paths against each
other.
"""

from __future__ import annotations

import math
import os
import warnings

import numpy as np

__all__ = [
    "BACKEND",
    "advance_interval",
    "advance_span",
    "weight_integrals",
    "exclusion_env_replay",
    "occupancy_time_average",
    "get_impl",
]

_choice = os.environ.get("NASHLAB_BACKEND", "").strip().lower()
if _choice not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"NASHLAB_BACKEND must be 'numba' or 'numpy', got {_choice!r}"
    )

_have_numba = False
if _choice != "numpy":
    try:
        from numba import njit

        _have_numba = True
    except ImportError:
        if _choice == "numba":
            raise
        warnings.warn("numba not importable, using the numpy backend")

BACKEND = "numba" if _have_numba else "numpy"

# Poisson-series safety margin: k ranges a few std deviations past mu*tau.
_MAX_EXTRA_TERMS = 220


def _series_limit(mt: float) -> int:
    return int(mt + 12.0 * math.sqrt(mt + 1.0)) + _MAX_EXTRA_TERMS


# ---------------------------------------------------------------------------
# uniformization: u -> exp(tau*Q) u for the master equation on an edge list
# ---------------------------------------------------------------------------


_MU_TAU_CAP = 64.0


def _advance_interval_numpy(tail, head, rate, site_rate, u, mu, tau, tol):
    n = u.shape[0]
    keep = 1.0 - site_rate / mu
    c = rate / mu
    remaining = tau
    acc = u
    while remaining > 0.0:
        step = min(remaining, _MU_TAU_CAP / mu)
        remaining -= step
        mt = mu * step
        if mt == 0.0:
            break
        w = math.exp(-mt)
        v = acc.copy()
        out = w * acc
        cum = w
        kmax = _series_limit(mt)
        for k in range(1, kmax + 1):
            if cum >= 1.0 - tol:
                break
            v = v * keep + np.bincount(tail, c * v[head], minlength=n) + np.bincount(
                head, c * v[tail], minlength=n
            )
            w *= mt / k
            cum += w
            out += w * v
        # fold the truncated Poisson tail onto the last iterate: keeps the
        # propagator stochastic (mass-exact) and nonnegative
        out += (1.0 - cum) * v
        acc = out
    return acc.copy() if acc is u else acc


if _have_numba:

    @njit(cache=True)
    def _advance_interval_numba(tail, head, rate, site_rate, u, mu, tau, tol):  # pragma: no cover
        n = u.shape[0]
        m = tail.shape[0]
        acc = u.copy()
        remaining = tau
        v = np.empty(n)
        nv = np.empty(n)
        while remaining > 0.0:
            step = remaining if remaining * mu <= 64.0 else 64.0 / mu
            remaining -= step
            mt = mu * step
            if mt == 0.0:
                break
            w = math.exp(-mt)
            cum = w
            for i in range(n):
                v[i] = acc[i]
                acc[i] = w * acc[i]
            kmax = int(mt + 12.0 * math.sqrt(mt + 1.0)) + 220
            for k in range(1, kmax + 1):
                if cum >= 1.0 - tol:
                    break
                for i in range(n):
                    nv[i] = v[i] * (1.0 - site_rate[i] / mu)
                # closed edges contribute exactly zero flow
                for e in range(m):
                    if rate[e] != 0.0:
                        nv[tail[e]] += rate[e] / mu * v[head[e]]
                for e in range(m):
                    if rate[e] != 0.0:
                        nv[head[e]] += rate[e] / mu * v[tail[e]]
                for i in range(n):
                    v[i] = nv[i]
                w *= mt / k
                cum += w
                for i in range(n):
                    acc[i] += w * v[i]
            rem = 1.0 - cum
            for i in range(n):
                acc[i] += rem * v[i]
        return acc

    @njit(cache=True)
    def _advance_span_numba(tail, head, a, site_rate, u, mu, tol,
                            t_cur, t_target, ev_t, ev_e, ev_v, ptr):  # pragma: no cover
        """March from t_cur to t_target applying environment events in
        step; mutates a and site_rate in place, returns (u, ptr)."""
        n_ev = ev_t.shape[0]
        while True:
            t_next = ev_t[ptr] if ptr < n_ev else math.inf
            step_to = t_target if t_target < t_next else t_next
            tau = step_to - t_cur
            if tau > 0.0:
                u = _advance_interval_numba(tail, head, a, site_rate, u, mu, tau, tol)
            t_cur = step_to
            if t_next <= t_target:
                while ptr < n_ev and ev_t[ptr] == t_next:
                    e = ev_e[ptr]
                    delta = ev_v[ptr] - a[e]
                    if delta != 0.0:
                        a[e] = ev_v[ptr]
                        site_rate[tail[e]] += delta
                        site_rate[head[e]] += delta
                    ptr += 1
            if step_to >= t_target:
                return u, ptr


# ---------------------------------------------------------------------------
# weight fields: w_t(e)^2 = int_t^T k(s-t) a_s(e) ds for k(u) = (1+u)^(-m)
# ---------------------------------------------------------------------------
# Per-edge piecewise-constant environments are passed CSR-style:
# pieces of edge e live at [ptr[e], ptr[e+1]) with start times and values;
# a piece extends to the next start (or to the horizon for the last one).


def _weight_integrals_numpy(ptr, starts, vals, horizon, grid, m):
    n_edges = ptr.shape[0] - 1
    n_pieces = starts.shape[0]
    ends = np.empty(n_pieces)
    for e in range(n_edges):
        lo, hi = ptr[e], ptr[e + 1]
        if lo < hi:
            ends[lo : hi - 1] = starts[lo + 1 : hi]
            ends[hi - 1] = horizon
    edge_of = np.repeat(np.arange(n_edges), np.diff(ptr))
    c = 1.0 / (m - 1.0)
    out = np.zeros((grid.shape[0], n_edges))
    for i, t in enumerate(grid):
        live = ends > t
        if not live.any():
            continue
        s0 = np.maximum(starts[live], t) - t
        s1 = ends[live] - t
        contrib = vals[live] * c * ((1.0 + s0) ** (1.0 - m) - (1.0 + s1) ** (1.0 - m))
        out[i] = np.bincount(edge_of[live], contrib, minlength=n_edges)
    return out


if _have_numba:

    @njit(cache=True)
    def _weight_integrals_numba(ptr, starts, vals, horizon, grid, m):  # pragma: no cover
        n_edges = ptr.shape[0] - 1
        n_grid = grid.shape[0]
        out = np.zeros((n_grid, n_edges))
        c = 1.0 / (m - 1.0)
        for e in range(n_edges):
            lo, hi = ptr[e], ptr[e + 1]
            for i in range(n_grid):
                t = grid[i]
                acc = 0.0
                for j in range(lo, hi):
                    end = starts[j + 1] if j + 1 < hi else horizon
                    if end <= t:
                        continue
                    if vals[j] == 0.0:
                        continue
                    s0 = starts[j] - t
                    if s0 < 0.0:
                        s0 = 0.0
                    s1 = end - t
                    acc += vals[j] * c * (
                        (1.0 + s0) ** (1.0 - m) - (1.0 + s1) ** (1.0 - m)
                    )
                out[i, e] = acc
        return out


# ---------------------------------------------------------------------------
# exclusion-process replay: swap stream -> per-edge 0/1 value-change events
# ---------------------------------------------------------------------------


def _exclusion_env_replay_py(
    ring_t, ring_e, occ, tor_tail, tor_head, inc_ptr, inc_edges, box_tail, box_head, a_cur
):
    ev_t = np.empty(ring_t.shape[0] * 8)
    ev_e = np.empty(ring_t.shape[0] * 8, dtype=np.int64)
    ev_v = np.empty(ring_t.shape[0] * 8)
    cnt = 0
    for i in range(ring_t.shape[0]):
        e = ring_e[i]
        x, y = tor_tail[e], tor_head[e]
        if occ[x] == occ[y]:
            continue
        occ[x], occ[y] = occ[y], occ[x]
        for s in (x, y):
            for j in range(inc_ptr[s], inc_ptr[s + 1]):
                be = inc_edges[j]
                v = 1.0 if occ[box_tail[be]] == 0 and occ[box_head[be]] == 0 else 0.0
                if v != a_cur[be]:
                    a_cur[be] = v
                    ev_t[cnt] = ring_t[i]
                    ev_e[cnt] = be
                    ev_v[cnt] = v
                    cnt += 1
    return ev_t[:cnt].copy(), ev_e[:cnt].copy(), ev_v[:cnt].copy()


if _have_numba:

    @njit(cache=True)
    def _exclusion_env_replay_numba(
        ring_t, ring_e, occ, tor_tail, tor_head, inc_ptr, inc_edges, box_tail, box_head, a_cur
    ):  # pragma: no cover
        cap = ring_t.shape[0] * 8
        ev_t = np.empty(cap)
        ev_e = np.empty(cap, dtype=np.int64)
        ev_v = np.empty(cap)
        cnt = 0
        for i in range(ring_t.shape[0]):
            e = ring_e[i]
            x = tor_tail[e]
            y = tor_head[e]
            if occ[x] == occ[y]:
                continue
            tmp = occ[x]
            occ[x] = occ[y]
            occ[y] = tmp
            for sidx in range(2):
                s = x if sidx == 0 else y
                for j in range(inc_ptr[s], inc_ptr[s + 1]):
                    be = inc_edges[j]
                    if occ[box_tail[be]] == 0 and occ[box_head[be]] == 0:
                        v = 1.0
                    else:
                        v = 0.0
                    if v != a_cur[be]:
                        a_cur[be] = v
                        ev_t[cnt] = ring_t[i]
                        ev_e[cnt] = be
                        ev_v[cnt] = v
                        cnt += 1
        return ev_t[:cnt].copy(), ev_e[:cnt].copy(), ev_v[:cnt].copy()


def _occupancy_time_average_py(ring_t, ring_e, occ, tor_tail, tor_head, site, horizon):
    total = 0.0
    last = 0.0
    state = occ[site]
    for i in range(ring_t.shape[0]):
        e = ring_e[i]
        x, y = tor_tail[e], tor_head[e]
        if occ[x] == occ[y]:
            continue
        if x == site or y == site:
            total += state * (ring_t[i] - last)
            last = ring_t[i]
            state = 1 - state
        occ[x], occ[y] = occ[y], occ[x]
    total += state * (horizon - last)
    return total / horizon


if _have_numba:

    @njit(cache=True)
    def _occupancy_time_average_numba(ring_t, ring_e, occ, tor_tail, tor_head, site, horizon):  # pragma: no cover
        total = 0.0
        last = 0.0
        state = occ[site]
        for i in range(ring_t.shape[0]):
            e = ring_e[i]
            x = tor_tail[e]
            y = tor_head[e]
            if occ[x] == occ[y]:
                continue
            if x == site or y == site:
                total += state * (ring_t[i] - last)
                last = ring_t[i]
                state = 1 - state
            tmp = occ[x]
            occ[x] = occ[y]
            occ[y] = tmp
        total += state * (horizon - last)
        return total / horizon


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

_IMPLS = {
    "numpy": {
        "advance_interval": _advance_interval_numpy,
        "weight_integrals": _weight_integrals_numpy,
        "exclusion_env_replay": _exclusion_env_replay_py,
        "occupancy_time_average": _occupancy_time_average_py,
        "advance_span": None,
    }
}
if _have_numba:
    _IMPLS["numba"] = {
        "advance_interval": _advance_interval_numba,
        "weight_integrals": _weight_integrals_numba,
        "exclusion_env_replay": _exclusion_env_replay_numba,
        "occupancy_time_average": _occupancy_time_average_numba,
        "advance_span": _advance_span_numba,
    }


def get_impl(backend: str) -> dict:
    """Kernel table for an explicit backend (used by the benchmark)."""
    return _IMPLS[backend]


advance_interval = _IMPLS[BACKEND]["advance_interval"]
weight_integrals = _IMPLS[BACKEND]["weight_integrals"]
exclusion_env_replay = _IMPLS[BACKEND]["exclusion_env_replay"]
occupancy_time_average = _IMPLS[BACKEND]["occupancy_time_average"]
advance_span = _IMPLS[BACKEND]["advance_span"]
