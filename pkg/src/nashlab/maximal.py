"""Ergodic maximal functions over centered boxes, with Monte Carlo probes
of the weak (1,1) estimate and the strong L^p estimate.

Periodic fields on the torus of side 2L+1 stand in for abstract
measure-preserving systems: lattice shifts are exactly measure-preserving
by periodicity, and the box radius r ranges over 1..L (the period caps the
scale).  Probability statements are estimated over independent field
realizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "StationaryField",
    "sample_field",
    "maximal_fn",
    "min_fn",
    "box_average_stack",
    "weak11_experiment",
    "lp_maximal_ratio",
]


@dataclass(frozen=True)
class StationaryField:
    """Periodic real field on the torus of side 2L+1."""

    d: int
    L: int
    values: np.ndarray  # shape (2L+1,)*d
    law: str
    seed: int

    def __post_init__(self):
        side = 2 * self.L + 1
        if self.values.shape != (side,) * self.d:
            raise ValueError(f"field shape {self.values.shape} does not match the torus")
        self.values.flags.writeable = False


def _draw(law: str, rng, shape):
    name, _, arg = law.partition(":")
    name = name.strip().lower()
    if name == "constant":
        return np.full(shape, float(arg) if arg else 1.0)
    if name == "exp":
        return rng.exponential(1.0, shape)
    if name == "pareto":
        index = float(arg) if arg else 1.5
        return (1.0 - rng.random(shape)) ** (-1.0 / index)
    if name == "uniform":
        return rng.random(shape)
    raise ValueError(f"unknown field law {law!r}")


def sample_field(d: int, L: int, law: str, seed: int) -> StationaryField:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7, 0)))
    side = 2 * L + 1
    return StationaryField(d, L, _draw(law, rng, (side,) * d), law, seed)


def box_average_stack(values: np.ndarray, L: int, d: int | None = None) -> np.ndarray:
    """Averages over centered boxes B_r, r = 1..L, at every site.

    The trailing d axes are the periodic spatial ones (leading axes are
    batch).  Returns an array with a new leading radius axis of length L.
    """
    side = 2 * L + 1
    if d is None:
        d = values.ndim
    spatial = tuple(range(values.ndim - d, values.ndim))
    for ax in spatial:
        if values.shape[ax] != side:
            raise ValueError("spatial axes must have length 2L+1")
    pad = [(0, 0)] * values.ndim
    for ax in spatial:
        pad[ax] = (L, L)
    wrapped = np.pad(values, pad, mode="wrap")
    # prefix sums along each spatial axis
    c = wrapped.astype(np.float64)
    for ax in spatial:
        c = np.cumsum(c, axis=ax)
        shape = list(c.shape)
        shape[ax] = 1
        c = np.concatenate([np.zeros(shape), c], axis=ax)
    out = []
    for r in range(1, L + 1):
        width = 2 * r + 1
        block = c
        for k, ax in enumerate(spatial):
            lo = L - r
            span = side
            idx_hi = [slice(None)] * block.ndim
            idx_lo = [slice(None)] * block.ndim
            idx_hi[ax] = slice(lo + width, lo + width + span)
            idx_lo[ax] = slice(lo, lo + span)
            block = block[tuple(idx_hi)] - block[tuple(idx_lo)]
        out.append(block / width**d)
    return np.stack(out, axis=0)


def maximal_fn(f: StationaryField, x=None):
    """sup over r in 1..L of the box average of f centered at x.

    With x None, returns the whole maximal field as an array."""
    stack = box_average_stack(f.values, f.L, f.d).max(axis=0)
    if x is None:
        return stack
    return float(stack[tuple(int(c) + f.L for c in x)])


def min_fn(g: StationaryField, x=None):
    """inf over r in 1..L of the box average of g centered at x."""
    stack = box_average_stack(g.values, g.L, g.d).min(axis=0)
    if x is None:
        return stack
    return float(stack[tuple(int(c) + g.L for c in x)])


def weak11_experiment(law: str, d: int, L: int, lambdas, n_seeds: int, seed: int):
    """Monte Carlo table of the weak-type ratio lambda P[Mf >= lambda]
    against the dimensional bound 3^d E||f||.

    Fields are i.i.d. nonnegative per site; Mf is evaluated at the origin
    (the law of Mf(x) is site-independent by stationarity).  Rows:
    (law, d, L, lambda, estimate, stderr, bound) where estimate is
    lambda*P-hat and bound is 3^d * E-hat[|f|]."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(8, 0)))
    side = 2 * L + 1
    batch = max(1, min(n_seeds, int(4e6 // side**d)))
    m_origin = np.empty(n_seeds)
    mean_abs = np.empty(n_seeds)
    done = 0
    while done < n_seeds:
        b = min(batch, n_seeds - done)
        fields = _draw(law, rng, (b,) + (side,) * d)
        stack = box_average_stack(fields, L, d)
        center = (slice(None), slice(None)) + (L,) * d
        m_origin[done : done + b] = stack[center].max(axis=0)
        mean_abs[done : done + b] = np.abs(fields).mean(axis=tuple(range(1, d + 1)))
        done += b
    rows = []
    for lam in lambdas:
        hits = (m_origin >= lam).astype(np.float64)
        per_seed = lam * hits - 3.0**d * mean_abs
        est = lam * hits.mean()
        bound = 3.0**d * mean_abs.mean()
        stderr = float(per_seed.std(ddof=1) / math.sqrt(n_seeds))
        rows.append((law, d, L, float(lam), float(est), stderr, float(bound)))
    return rows


def lp_maximal_ratio(law: str, p: float, d: int, L: int, n_seeds: int, seed: int) -> float:
    """Empirical ||Mf||_p / ||f||_p over realizations (p > 1; p = inf
    compares suprema, where averaging makes M a contraction)."""
    if p <= 1:
        raise ValueError(f"the strong maximal estimate requires p > 1, got {p}")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(9, 0)))
    side = 2 * L + 1
    m_vals = np.empty(n_seeds)
    f_vals = np.empty(n_seeds)
    batch = max(1, min(n_seeds, int(4e6 // side**d)))
    done = 0
    while done < n_seeds:
        b = min(batch, n_seeds - done)
        fields = _draw(law, rng, (b,) + (side,) * d)
        stack = box_average_stack(fields, L, d)
        center = (slice(None), slice(None)) + (L,) * d
        m_vals[done : done + b] = stack[center].max(axis=0)
        f_vals[done : done + b] = np.abs(fields[(slice(None),) + (L,) * d])
        done += b
    if math.isinf(p):
        return float(m_vals.max() / f_vals.max())
    num = float((m_vals**p).mean() ** (1.0 / p))
    den = float((f_vals**p).mean() ** (1.0 / p))
    return num / den
