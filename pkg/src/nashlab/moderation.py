"""Moderation machinery for dynamic environments: smoothing kernels,
weight fields built from the environment, the space-time maximal
statistic, and assembly of the diffusive decay bounds.

The smoothing kernel family is k(u) = (1+u)^(-m) with m > 3, for which
K(u) = k(u) + int_u^inf s k(s) ds and all the norms appearing in the
bounds have closed forms; a quadrature cross-check guards the algebra.
The weight field w_t(e)^2 = int_t^inf k(s-t) a_s(e) ds is evaluated
exactly as antiderivative differences over the environment's constancy
intervals, truncated at the horizon with the (conductance-free) tail
reported separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels as _kernels
from .environments import DynamicEnvironment
from .inequalities import NashExponents, maximal_Mq
from .lattice import EdgeField
from .heat import HeatTrace

__all__ = [
    "Kernel",
    "WeightField",
    "ModerationReport",
    "BoundReport",
    "kernel_constants",
    "weights_from_env",
    "script_Mq",
    "check_moderation",
    "assemble_bounds",
]


@dataclass(frozen=True)
class Kernel:
    """Power smoothing kernel k(u) = (1+u)^(-m), m > 3.

    Exposes closed forms for K, its antiderivatives and tail integrals.
    m > 3 is what makes int (1+u^2) k(u) du finite, which the moderation
    criterion requires.
    """

    m: float = 4.0

    def __post_init__(self):
        if self.m <= 3:
            raise ValueError(f"kernel exponent must exceed 3, got {self.m}")

    def k(self, u):
        return (1.0 + u) ** (-self.m)

    def k_integral(self, lo, hi) -> float:
        """int_lo^hi k(u) du, closed form."""
        m = self.m
        return ((1.0 + lo) ** (1.0 - m) - (1.0 + hi) ** (1.0 - m)) / (m - 1.0)

    def k_tail(self, u) -> float:
        """int_u^inf k."""
        return (1.0 + u) ** (1.0 - self.m) / (self.m - 1.0)

    def K(self, u):
        """K(u) = k(u) + int_u^inf s k(s) ds."""
        m = self.m
        return (
            (1.0 + u) ** (-m)
            + (1.0 + u) ** (2.0 - m) / (m - 2.0)
            - (1.0 + u) ** (1.0 - m) / (m - 1.0)
        )

    def K_integral(self, lo, hi) -> float:
        """int_lo^hi K(u) du, closed form."""
        m = self.m

        def anti(u):
            # antiderivative of K, increasing
            return (
                -((1.0 + u) ** (1.0 - m)) / (m - 1.0)
                - (1.0 + u) ** (3.0 - m) / ((m - 2.0) * (m - 3.0))
                + (1.0 + u) ** (2.0 - m) / ((m - 1.0) * (m - 2.0))
            )

        return anti(hi) - anti(lo)

    def K_tail(self, u) -> float:
        """int_u^inf K."""
        m = self.m
        return (
            (1.0 + u) ** (1.0 - m) / (m - 1.0)
            + (1.0 + u) ** (3.0 - m) / ((m - 2.0) * (m - 3.0))
            - (1.0 + u) ** (2.0 - m) / ((m - 1.0) * (m - 2.0))
        )

    @property
    def norm_l1(self) -> float:
        return self.K_tail(0.0)

    @property
    def norm_l1_unit(self) -> float:
        return self.K_integral(0.0, 1.0)


def kernel_constants(m: float, exps: NashExponents) -> tuple[float, float, float]:
    """(||K||_1, ||K||_{L1[0,1]}, C(K)) for the power kernel of exponent m.

    C(K) = 1 v ||K||_1^{alpha/beta} / ||K||_{L1[0,1]}^{(1-alpha)/beta};
    undefined at beta = 0 (theta = 1)."""
    if exps.beta == 0.0:
        raise ValueError("C(K) is undefined at theta = 1 (beta = 0)")
    ker = Kernel(m)
    k1 = ker.norm_l1
    k01 = ker.norm_l1_unit
    ck = max(1.0, k1 ** (exps.alpha / exps.beta) / k01 ** ((1.0 - exps.alpha) / exps.beta))
    return k1, k01, ck


@dataclass(frozen=True)
class WeightField:
    """Time-indexed edge weights w on a sample grid.

    values[i, e] = w_{grid[i]}(e); tail[i] bounds the part of the defining
    integral beyond the construction horizon (conductances are at most 1,
    so the tail of k bounds it edge-independently).
    """

    geometry: object
    grid: np.ndarray
    values: np.ndarray
    tail: np.ndarray
    m: float

    def at(self, t: float) -> EdgeField:
        i = int(np.argmin(np.abs(self.grid - t)))
        if abs(self.grid[i] - t) > 1e-9:
            raise KeyError(f"t={t} is not on the weight grid")
        return EdgeField(self.geometry, self.values[i])


def weights_from_env(env: DynamicEnvironment, m: float, grid) -> WeightField:
    """w_t(e)^2 = int_t^horizon k(s-t) a_s(e) ds on the given time grid,
    computed exactly over the environment's constancy pieces."""
    ker = Kernel(m)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0 or grid.min() < 0 or grid.max() > env.horizon + 1e-12:
        raise ValueError("grid must lie within [0, horizon]")
    ptr, starts, vals = env.all_pieces()
    w2 = _kernels.weight_integrals(ptr, starts, vals, env.horizon, grid, float(m))
    w2 = np.maximum(w2, 0.0)
    tail = np.array([ker.k_tail(env.horizon - t) for t in grid])
    return WeightField(env.geometry, grid, np.sqrt(w2), tail, float(m))


def script_Mq(w: WeightField, q: float, t_min: float = 1.0) -> float:
    """Space-time maximal statistic of a time-indexed weight field:

    script_M^(-2) = inf over grid t >= t_min of (1/t) int_0^t M_q^(-2)(w_s) ds,

    with the inner integral discretised by the trapezoid rule on the grid.
    """
    grid = w.grid
    if grid.max() < t_min:
        raise ValueError(f"grid must reach t >= {t_min}")
    inv2 = np.empty(grid.shape[0])
    for i in range(grid.shape[0]):
        mq = maximal_Mq(EdgeField(w.geometry, w.values[i]), q)
        inv2[i] = 0.0 if math.isinf(mq) else mq ** (-2.0)
    # cumulative trapezoid of inv2 over the grid
    dt = np.diff(grid)
    cum = np.concatenate(([0.0], np.cumsum(0.5 * dt * (inv2[1:] + inv2[:-1]))))
    sel = grid >= t_min
    averages = cum[sel] / np.maximum(grid[sel], 1e-300)
    inf_avg = float(averages.min())
    if inf_avg <= 0.0:
        return math.inf
    return inf_avg ** (-0.5)


@dataclass(frozen=True)
class ModerationReport:
    """Pointwise comparison of ||w_t grad u_t||^2 against the smoothed
    Dirichlet energy int_t^T K(s-t) D_s ds plus its conservative tail."""

    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray
    c_emp: float
    m: float

    def as_dict(self) -> dict:
        return {
            "t": self.times.tolist(),
            "lhs": self.lhs.tolist(),
            "rhs": self.rhs.tolist(),
            "ratio": self.ratio.tolist(),
            "c_emp": self.c_emp,
            "kernel_m": self.m,
        }


def check_moderation(trace: HeatTrace, w: WeightField, m: float) -> ModerationReport:
    """Empirical moderation constant of a trace against a weight field.

    lhs_t needs grad u_t, so the trace must either carry wgrad2 (recorded
    during evolution) or full snapshots at the weight grid times.  rhs_t
    is the trapezoid of K(s-t) D_s over [t, T] plus the tail bound
    4 d E_T int_{T-t}^inf K: beyond the horizon the Dirichlet energy is
    at most 4 d E_s <= 4 d E_T since the energy is nonincreasing, so the
    reported ratio errs conservatively while staying horizon-robust.
    """
    ker = Kernel(m)
    grid = trace.times
    if w.grid.shape != grid.shape or np.abs(w.grid - grid).max() > 1e-9:
        raise ValueError("trace and weight field must share one grid")
    n = grid.shape[0]
    if trace.wgrad2 is not None:
        lhs = trace.wgrad2.copy()
    else:
        geom = trace.geometry
        lhs = np.empty(n)
        for i, t in enumerate(grid):
            u = trace.snapshot(t)
            g = u[geom.edge_head] - u[geom.edge_tail]
            lhs[i] = ((w.values[i] * g) ** 2).sum()
    d = trace.geometry.d
    T = grid[-1]
    e_horizon = trace.E[-1]
    rhs = np.empty(n)
    for i, t in enumerate(grid):
        s = grid[i:]
        vals = ker.K(s - t) * trace.D[i:]
        integral = float(np.trapezoid(vals, s)) if s.size > 1 else 0.0
        tail = 4.0 * d * e_horizon * ker.K_tail(T - t)
        rhs[i] = integral + tail
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lhs == 0.0, 0.0, lhs / rhs)
    if np.any((rhs == 0.0) & (lhs > 0.0)):
        raise AssertionError(
            "moderation inconsistency: vanishing smoothed energy with a "
            "nonvanishing weighted gradient"
        )
    return ModerationReport(grid.copy(), lhs, rhs, ratio, float(np.max(ratio)), float(m))


@dataclass(frozen=True)
class BoundReport:
    """Empirical constants of the diffusive decay bounds for one run.

    energy side: t^{d/2} E_t against C(K) script_M^{2 alpha/beta};
    pointwise side: t^{d/2} p00_t against the two-sided product form.
    cauchy_schwarz rows are (t, p00_t, sqrt(E_{t/2} * E-reversed_{t/2}))
    with the reversed factor computed in the environment reversed around
    that same t, so the inequality is exact, not distributional.
    terminal rows check p00(T) <= sqrt(E_s * E-reversed_{T-s}) for every
    grid s, which needs only the single horizon-reversed trace.
    """

    times: np.ndarray
    energy_ratio: np.ndarray
    pointwise_ratio: np.ndarray
    C_emp_energy: float
    C_emp_pointwise: float
    script_M: float
    script_M_rev: float
    CK: float
    cauchy_schwarz: list
    terminal_margin: float

    def as_dict(self) -> dict:
        return {
            "t": self.times.tolist(),
            "energy_ratio": self.energy_ratio.tolist(),
            "pointwise_ratio": self.pointwise_ratio.tolist(),
            "C_emp_energy": self.C_emp_energy,
            "C_emp_pointwise": self.C_emp_pointwise,
            "script_Mq": self.script_M,
            "script_Mq_reversed": self.script_M_rev,
            "CK": self.CK,
            "cauchy_schwarz": [list(row) for row in self.cauchy_schwarz],
            "terminal_margin": self.terminal_margin,
        }


_CS_SLACK = 1e-8


def assemble_bounds(
    trace: HeatTrace,
    reversed_trace: HeatTrace | None,
    exps: NashExponents,
    m: float,
    w: WeightField,
    w_rev: WeightField | None,
    midpoint_cs: list | None = None,
    t_min: float = 1.0,
) -> BoundReport:
    """Measure the implied constants of the energy and pointwise decay
    bounds, and hard-assert the Cauchy-Schwarz pointwise control.

    ``midpoint_cs`` rows are (t, p00_t, E_half, E_rev_half) precomputed
    with exact per-t reversal; the terminal family is derived here from
    the two traces.  Any violation beyond integrator tolerance raises.
    """
    _, _, ck = kernel_constants(m, exps)
    smq = script_Mq(w, exps.q, t_min=t_min)
    grid = trace.times
    sel = grid >= t_min
    t = grid[sel]
    d = trace.geometry.d
    energy_ratio = (t ** (d / 2.0)) * trace.E[sel] / (ck * smq ** (2.0 * exps.alpha / exps.beta))

    if reversed_trace is not None and w_rev is not None:
        smq_rev = script_Mq(w_rev, exps.q, t_min=t_min)
        ck_rev = ck  # same kernel family in both time directions
        denom = math.sqrt(ck * ck_rev) * (smq * smq_rev) ** (exps.alpha / exps.beta)
        pointwise_ratio = (t ** (d / 2.0)) * trace.p00[sel] / denom
    else:
        smq_rev = math.nan
        pointwise_ratio = np.full(t.shape, math.nan)

    cs_rows = []
    terminal_margin = -math.inf
    if reversed_trace is not None:
        # p00 at the horizon against every split point of the two traces
        T = grid[-1]
        p_end = trace.p00[-1]
        for i, s in enumerate(grid):
            j = grid.shape[0] - 1 - i
            bound = math.sqrt(trace.E[i] * reversed_trace.E[j])
            margin = p_end - bound
            terminal_margin = max(terminal_margin, margin)
            if margin > _CS_SLACK:
                raise AssertionError(
                    f"terminal Cauchy-Schwarz violated at split s={s}: "
                    f"p00(T)={p_end} > bound={bound}"
                )
    if midpoint_cs:
        for t_c, p_val, e_half, e_rev_half in midpoint_cs:
            bound = math.sqrt(e_half * e_rev_half)
            cs_rows.append((float(t_c), float(p_val), float(bound)))
            if p_val - bound > _CS_SLACK:
                raise AssertionError(
                    f"Cauchy-Schwarz pointwise bound violated at t={t_c}: "
                    f"p00={p_val} > bound={bound}"
                )

    return BoundReport(
        times=t.copy(),
        energy_ratio=energy_ratio,
        pointwise_ratio=pointwise_ratio,
        C_emp_energy=float(np.max(energy_ratio)),
        C_emp_pointwise=(
            float(np.nanmax(pointwise_ratio))
            if t.size and not np.isnan(pointwise_ratio).all()
            else math.nan
        ),
        script_M=smq,
        script_M_rev=smq_rev,
        CK=ck,
        cauchy_schwarz=cs_rows,
        terminal_margin=terminal_margin,
    )
