"""Random conductance environments: static i.i.d. laws, the simple
exclusion process (Kawasaki dynamics) on the torus, and time reversal.

The exclusion process runs on the torus of side 2L+1 so that the product
Bernoulli measure is exactly stationary at finite size.  The random walk
itself lives on the box B_L and sees the torus edge values; since the box
is a fundamental domain, box edges are a prefix of the torus edge
enumeration and the environment restriction is just an id filter.

Randomness is organised as one master seed expanded through
``numpy.random.SeedSequence`` spawn keys into independent per-component
streams, so every component can be re-run in isolation and bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .lattice import EdgeField, LatticeGeometry

__all__ = [
    "StaticEnvironment",
    "ExclusionTrajectory",
    "DynamicEnvironment",
    "parse_law",
    "iid_static",
    "exclusion_simulate",
    "env_from_exclusion",
    "time_reverse",
    "resampling_env",
    "component_rng",
]

_STREAMS = {
    "static": 1,
    "exclusion-init": 2,
    "exclusion-rings": 3,
    "corpus": 4,
    "resample": 5,
    "checks": 6,
}


def component_rng(master_seed: int, component: str, index: int = 0) -> np.random.Generator:
    """Independent, reproducible stream for one component of a run."""
    key = _STREAMS[component] if component in _STREAMS else abs(hash(component)) % 2**31
    seq = np.random.SeedSequence(master_seed, spawn_key=(key, index))
    return np.random.default_rng(seq)


def parse_law(law: str) -> tuple[str, float]:
    """Parse 'constant:c' / 'power:eta' law descriptors."""
    name, _, arg = law.partition(":")
    name = name.strip().lower()
    if name not in ("constant", "power"):
        raise ValueError(f"unknown conductance law {law!r}")
    value = float(arg) if arg else 1.0
    if name == "power" and value <= 0:
        raise ValueError(f"power-law exponent must be positive, got {value}")
    if name == "constant" and not (0 < value <= 1):
        raise ValueError(f"constant law needs a value in (0,1], got {value}")
    return name, value


@dataclass(frozen=True)
class StaticEnvironment:
    """Time-independent conductances in (0,1] on the box edges."""

    field: EdgeField
    law: str
    seed: int

    @property
    def geometry(self) -> LatticeGeometry:
        return self.field.geometry


def iid_static(d: int, L: int, law: str, seed: int, realization: int = 0) -> StaticEnvironment:
    """I.i.d. edge conductances.

    'constant:c' gives a == c; 'power:eta' draws from P[a <= u] = u^eta on
    (0,1], for which E[a^-s] is finite exactly when s < eta.
    """
    name, value = parse_law(law)
    geom = LatticeGeometry(d, L)
    if name == "constant":
        vals = np.full(geom.n_edges, value)
    else:
        rng = component_rng(seed, "static", realization)
        u = rng.random(geom.n_edges)
        vals = (1.0 - u) ** (1.0 / value)
    return StaticEnvironment(EdgeField(geom, vals), law, seed)


@dataclass(frozen=True)
class ExclusionTrajectory:
    """Kawasaki swap stream on the torus over [0, horizon].

    ``times``/``edges`` list every ring of the global rate-|edges| clock;
    rings across an edge with equal endpoint occupancies are no-ops but are
    kept, being part of the faithful event stream.
    """

    torus: LatticeGeometry
    rho: float
    initial: np.ndarray  # uint8 occupancy per torus site
    times: np.ndarray
    edges: np.ndarray
    horizon: float
    seed: int

    def __post_init__(self):
        self.initial.flags.writeable = False
        self.times.flags.writeable = False
        self.edges.flags.writeable = False

    @property
    def n_particles(self) -> int:
        return int(self.initial.sum())

    def occupancy_at(self, t: float) -> np.ndarray:
        """Replay the swap stream up to time t (inclusive)."""
        occ = self.initial.copy()
        upto = int(np.searchsorted(self.times, t, side="right"))
        for i in range(upto):
            e = self.edges[i]
            x, y = self.torus.edge_tail[e], self.torus.edge_head[e]
            occ[x], occ[y] = occ[y], occ[x]
        return occ

    def site_time_average(self, site: int) -> float:
        """Time average of the occupancy of one site over [0, horizon]."""
        return float(
            kernels.occupancy_time_average(
                self.times,
                self.edges,
                self.initial.copy(),
                self.torus.edge_tail,
                self.torus.edge_head,
                site,
                self.horizon,
            )
        )

    def dump_csv(self, path) -> None:
        """Event list as (time, edge_id, new_value); new_value flags whether
        the ring actually swapped two distinct occupancies."""
        occ = self.initial.copy()
        with open(path, "w") as fh:
            fh.write("time,edge_id,new_value\n")
            for t, e in zip(self.times, self.edges):
                x, y = self.torus.edge_tail[e], self.torus.edge_head[e]
                eff = int(occ[x] != occ[y])
                occ[x], occ[y] = occ[y], occ[x]
                fh.write(f"{t!r},{int(e)},{eff}\n")


def exclusion_simulate(rho: float, d: int, L: int, T: float, seed: int, realization: int = 0) -> ExclusionTrajectory:
    """Simple exclusion process at density rho on the torus of side 2L+1.

    Every torus edge carries an independent rate-1 clock; rings swap the
    endpoint occupancies.  Implemented as a single global exponential
    clock of rate |edges| with a uniform edge choice, which is the same
    process and keeps the stream prefix-stable in T.
    """
    if not (0 <= rho < 1):
        raise ValueError(f"density must be in [0,1), got {rho}")
    torus = LatticeGeometry(d, L, periodic=True)
    rng_init = component_rng(seed, "exclusion-init", realization)
    occ = (rng_init.random(torus.n_sites) < rho).astype(np.uint8)
    rng = component_rng(seed, "exclusion-rings", realization)
    n_edges = torus.n_edges
    batch = 1 << 14
    times_parts, edges_parts = [], []
    total = 0.0
    while True:
        gaps = rng.exponential(1.0 / n_edges, batch)
        picks = rng.integers(0, n_edges, batch, dtype=np.int64)
        t = total + np.cumsum(gaps)
        total = t[-1]
        times_parts.append(t)
        edges_parts.append(picks)
        if total > T:
            break
    times = np.concatenate(times_parts)
    edges = np.concatenate(edges_parts)
    keep = times <= T
    return ExclusionTrajectory(
        torus, rho, occ, times[keep], edges[keep], float(T), seed
    )


@dataclass(frozen=True)
class DynamicEnvironment:
    """Piecewise-constant-in-time conductances on the box edges.

    ``initial`` holds a_0; events (time, edge, new value) are sorted by
    time with strictly increasing times per edge (simultaneous changes of
    distinct edges may share a timestamp).  Evaluation is right-continuous.
    """

    geometry: LatticeGeometry
    initial: np.ndarray
    times: np.ndarray
    edges: np.ndarray
    values: np.ndarray
    horizon: float

    def __post_init__(self):
        if self.times.shape != self.edges.shape or self.times.shape != self.values.shape:
            raise ValueError("event arrays must share one shape")
        if np.any(np.diff(self.times) < 0):
            raise ValueError("event times must be nondecreasing")
        if self.times.size and (self.times[0] <= 0 or self.times[-1] > self.horizon):
            raise ValueError("event times must lie in (0, horizon]")
        if np.any((self.values < 0) | (self.values > 1)) or np.any(
            (self.initial < 0) | (self.initial > 1)
        ):
            raise ValueError("conductances must lie in [0,1]")
        for a in (self.initial, self.times, self.edges, self.values):
            a.flags.writeable = False

    @property
    def n_events(self) -> int:
        return self.times.shape[0]

    @classmethod
    def static(cls, geom: LatticeGeometry, values: np.ndarray, horizon: float):
        empty_f = np.empty(0)
        empty_i = np.empty(0, dtype=np.int64)
        return cls(geom, np.asarray(values, dtype=np.float64).copy(), empty_f,
                   empty_i, empty_f.copy(), float(horizon))

    def value_at(self, t: float) -> np.ndarray:
        """Right-continuous edge values at time t."""
        if t < 0 or t > self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        a = self.initial.copy()
        upto = int(np.searchsorted(self.times, t, side="right"))
        a[self.edges[:upto]] = self.values[:upto]
        return a

    def edge_pieces(self, edge: int) -> tuple[np.ndarray, np.ndarray]:
        """(start_times, values) of the constancy pieces of one edge."""
        sel = self.edges == edge
        starts = np.concatenate(([0.0], self.times[sel]))
        vals = np.concatenate(([self.initial[edge]], self.values[sel]))
        return starts, vals

    def all_pieces(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR piece arrays (ptr, starts, values) grouped by edge,
        time-sorted within each edge."""
        n = self.geometry.n_edges
        order = np.lexsort((self.times, self.edges))
        ev_e = self.edges[order]
        counts = np.bincount(ev_e, minlength=n) + 1
        ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        starts = np.zeros(ptr[-1])
        vals = np.zeros(ptr[-1])
        starts[ptr[:-1]] = 0.0
        vals[ptr[:-1]] = self.initial
        if ev_e.size:
            # slot after the leading t=0 piece, in per-edge time order
            run_start = np.r_[0, np.nonzero(np.diff(ev_e))[0] + 1]
            run_ids = np.repeat(
                np.arange(run_start.size), np.diff(np.r_[run_start, ev_e.size])
            )
            offsets = np.arange(ev_e.size) - run_start[run_ids]
            pos = ptr[ev_e] + 1 + offsets
            starts[pos] = self.times[order]
            vals[pos] = self.values[order]
        return ptr, starts, vals

    def events_between(self, lo: float, hi: float):
        """Indices of events with lo < time <= hi."""
        i0 = int(np.searchsorted(self.times, lo, side="right"))
        i1 = int(np.searchsorted(self.times, hi, side="right"))
        return i0, i1

    def dump_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("time,edge_id,new_value\n")
            for t, e, v in zip(self.times, self.edges, self.values):
                fh.write(f"{t!r},{int(e)},{v!r}\n")


def env_from_exclusion(traj: ExclusionTrajectory) -> DynamicEnvironment:
    """Degenerate edge conductances driven by the exclusion process:
    a_t(e) = 1 when both endpoints of e are empty at time t, else 0.

    Only box edges generate events; occupancy dynamics use the full torus.
    """
    torus = traj.torus
    box = LatticeGeometry(torus.d, torus.L)
    ptr, inc = box.incident_box_edges()
    occ0 = traj.initial
    a0 = (
        (occ0[box.edge_tail] == 0) & (occ0[box.edge_head] == 0)
    ).astype(np.float64)
    ev_t, ev_e, ev_v = kernels.exclusion_env_replay(
        traj.times,
        traj.edges,
        occ0.copy(),
        torus.edge_tail,
        torus.edge_head,
        ptr,
        inc,
        box.edge_tail,
        box.edge_head,
        a0.copy(),
    )
    return DynamicEnvironment(box, a0, ev_t, ev_e, ev_v, traj.horizon)


def time_reverse(env: DynamicEnvironment, t: float | None = None) -> DynamicEnvironment:
    """Environment s -> a_{t-s} on [0, t], as a right-continuous event list.

    Events at times >= t are discarded (the reversal of the restriction);
    double reversal returns the original environment restricted to [0, t]
    value-for-value.
    """
    if t is None:
        t = env.horizon
    if not (0 <= t <= env.horizon):
        raise ValueError(f"reversal point {t} outside [0, {env.horizon}]")
    keep = env.times < t
    ev_t = env.times[keep]
    ev_e = env.edges[keep]
    ev_v = env.values[keep]
    n = env.geometry.n_edges
    # per-edge: value on the last piece becomes the reversed initial value;
    # interior piece boundaries flip to t - time with the preceding value.
    order = np.lexsort((ev_t, ev_e))
    ev_t, ev_e, ev_v = ev_t[order], ev_e[order], ev_v[order]
    initial = env.initial.copy()
    if ev_e.size:
        last_idx = np.nonzero(np.r_[np.diff(ev_e) != 0, True])[0]
        initial[ev_e[last_idx]] = ev_v[last_idx]
    prev_vals = np.empty_like(ev_v)
    if ev_e.size:
        first_idx = np.nonzero(np.r_[True, np.diff(ev_e) != 0])[0]
        prev_vals[1:] = ev_v[:-1]
        prev_vals[first_idx] = env.initial[ev_e[first_idx]]
    new_t = t - ev_t
    order2 = np.argsort(new_t, kind="stable")
    return DynamicEnvironment(
        env.geometry,
        initial,
        new_t[order2],
        ev_e[order2],
        prev_vals[order2],
        float(t),
    )


def resampling_env(
    d: int, L: int, law: str, rate: float, T: float, seed: int, realization: int = 0
) -> DynamicEnvironment:
    """Synthetic dynamic environment: every edge independently redraws its
    value from the static law at the given Poisson rate."""
    geom = LatticeGeometry(d, L)
    name, value = parse_law(law)
    rng = component_rng(seed, "resample", realization)
    if name == "constant":
        init = np.full(geom.n_edges, value)
    else:
        init = (1.0 - rng.random(geom.n_edges)) ** (1.0 / value)
    n_ev = rng.poisson(rate * geom.n_edges * T)
    times = np.sort(rng.random(n_ev) * T)
    edges = rng.integers(0, geom.n_edges, n_ev, dtype=np.int64)
    if name == "constant":
        vals = np.full(n_ev, value)
    else:
        vals = (1.0 - rng.random(n_ev)) ** (1.0 / value)
    return DynamicEnvironment(geom, init, times, edges, vals, float(T))
