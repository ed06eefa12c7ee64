"""Exponent algebra and empirical constants for the anchored functional
inequalities.

The central object is the exponent triple (alpha, beta, gamma) attached to
dimension d, moment exponent p, integrability exponent q and interpolation
parameter theta.  The module computes the critical theta, validates the
algebraic identities the triple must satisfy, and measures empirical best
constants of the anchored Nash, Poincare-Sobolev, isoperimetric and
path-kernel inequalities over corpora of test functions.  Finiteness of
the true constants is not provable numerically; what is testable is that
the empirical constants stay stable when the box doubles, and that is what
the reports record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .lattice import (
    EdgeField,
    LatticeGeometry,
    SiteFunction,
    gradient,
    lp_norm,
)

__all__ = [
    "NashExponents",
    "InequalityReport",
    "theta_c",
    "nash_exponents",
    "maximal_Mq",
    "nash_ratio",
    "poincare_sobolev_ratio",
    "isoperimetric_ratio",
    "hls_ratio",
    "build_path",
    "path_count",
    "opt_lemma",
    "function_corpus",
]


def theta_c(d: int, p: float, q: float) -> float:
    """Critical interpolation parameter; 0 when q is infinite.

    Defined through 1/theta_c = 1 + (dp+2p)/(dp+2d) * (q/d - 1), evaluated
    with a single division so integer inputs give exact binary values.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if p <= d:
        raise ValueError(f"p must exceed d, got p={p}, d={d}")
    if q <= d:
        raise ValueError(f"q must exceed d, got q={q}, d={d}")
    if math.isinf(q):
        return 0.0
    inv = 1.0 + ((d * p + 2 * p) * (q - d)) / ((d * p + 2 * d) * d)
    return 1.0 / inv


@dataclass(frozen=True)
class NashExponents:
    """Exponent triple of the anchored Nash inequality.

    Satisfies alpha + beta + gamma = 1, the barycentric identity
    (d+2)/2 * beta + (p+2)/2 * gamma = 1, and
    alpha - gamma (p-d)/2 = d/2 (1 - alpha).
    """

    d: int
    p: float
    q: float
    theta: float
    theta_crit: float
    alpha: float
    beta: float
    gamma: float

    def as_dict(self) -> dict:
        return asdict(self)


def nash_exponents(d: int, p: float, q: float, theta: float) -> NashExponents:
    tc = theta_c(d, p, q)
    if theta < tc:
        raise ValueError(
            f"theta={theta} below the critical value theta_c={tc} for "
            f"(d={d}, p={p}, q={q}); the anchored Nash inequality requires "
            f"theta in [theta_c, 1]"
        )
    if theta > 1.0:
        raise ValueError(f"theta must be <= 1, got {theta}")
    alpha = (1.0 - theta) * d / (d + 2.0) + theta * p / (p + 2.0)
    beta = (1.0 - theta) * 2.0 / (d + 2.0)
    gamma = theta * 2.0 / (p + 2.0)
    return NashExponents(d, float(p), float(q), float(theta), tc, alpha, beta, gamma)


@dataclass(frozen=True)
class InequalityReport:
    """Empirical best constant of one inequality over one corpus."""

    name: str
    corpus: str
    L: int
    samples: int
    best_constant: float
    argmax_descriptor: str

    def as_dict(self) -> dict:
        return asdict(self)


def maximal_Mq(w: EdgeField, q: float) -> float:
    """Inverse-moment maximal function of an edge weight over centered boxes.

    M_q^q = max over r in 1..L of the average of w^{-q} over E_r; at
    q = inf the maximum of w^{-1} over E_L.  A vanishing weight yields
    +inf, which is the meaningful degenerate answer rather than an error.
    """
    geom = w.geometry
    if q <= geom.d:
        raise ValueError(f"q must exceed d={geom.d}, got {q}")
    v = w.values[geom.edge_radius <= geom.L]
    if np.any(v < 0):
        raise ValueError("weights must be nonnegative")
    if np.any(v == 0.0):
        return math.inf
    if math.isinf(q):
        return float((1.0 / v).max())
    inv_q = v ** (-q)
    # edges sorted into buckets by the smallest centered box containing them
    erad = geom.edge_radius[geom.edge_radius <= geom.L]
    sums = np.bincount(erad, inv_q, minlength=geom.L + 1)
    counts = np.bincount(erad, minlength=geom.L + 1)
    cum = np.cumsum(sums)[1:]
    den = np.cumsum(counts)[1:]
    best = (cum / den).max()
    return float(best ** (1.0 / q))


def nash_ratio(f: SiteFunction, w: EdgeField, exps: NashExponents) -> float:
    """Empirical constant of the anchored Nash inequality for one instance.

    Returns ||f||_2 / [ (M_q ||w grad f||_2)^alpha ||f||_1^beta
    || |x|_*^{p/2} f ||_2^gamma ]; +inf when the denominator vanishes.
    """
    geom = f.geometry
    if not np.any(f.values):
        raise ValueError("f must not be identically zero")
    l2 = lp_norm(f, 2)
    l1 = lp_norm(f, 1)
    grad = gradient(f).values
    wgrad = float(np.sqrt(((w.values * grad) ** 2).sum()))
    moment = float(
        np.sqrt((((geom.anchored ** (exps.p / 2.0)) * f.values) ** 2).sum())
    )
    mq = maximal_Mq(w, exps.q)
    den = (mq * wgrad) ** exps.alpha * l1**exps.beta * moment**exps.gamma
    if den == 0.0 or not math.isfinite(den):
        return math.inf
    return l2 / den


def poincare_sobolev_ratio(f: SiteFunction, r: int, p: float) -> float:
    """LHS/RHS of the box Poincare-Sobolev inequality at exponent p.

    p* solves d/p* = d/p - 1; requires 1 < p < d.  A constant f gives 0.
    """
    geom = f.geometry
    d = geom.d
    if not (1.0 < p < d):
        raise ValueError(f"need 1 < p < d={d}, got p={p}")
    pstar = d * p / (d - p)
    smask = geom.site_mask(r)
    fbar = f.values[smask].mean()
    lhs = float((np.abs(f.values[smask] - fbar) ** pstar).sum() ** (1.0 / pstar))
    emask = geom.edge_mask(r)
    g = gradient(f).values[emask]
    rhs = float((np.abs(g) ** p).sum() ** (1.0 / p))
    if lhs == 0.0:
        return 0.0
    return lhs / rhs if rhs > 0 else math.inf


def isoperimetric_ratio(A: np.ndarray, geom: LatticeGeometry, r: int) -> float:
    """|A|^((d-1)/d) / |edge boundary of A within E_r| for A a site mask.

    A must lie in B_r with |A| <= |B_r|/2; an empty A gives 0.
    """
    A = np.asarray(A, dtype=bool)
    if A.shape != (geom.n_sites,):
        raise ValueError("A must be a boolean mask over the sites of the box")
    smask = geom.site_mask(r)
    if np.any(A & ~smask):
        raise ValueError("A must be contained in B_r")
    size = int(A.sum())
    if size == 0:
        return 0.0
    if 2 * size > smask.sum():
        raise ValueError(f"|A|={size} exceeds |B_r|/2")
    emask = geom.edge_mask(r)
    boundary = int(
        (A[geom.edge_tail[emask]] != A[geom.edge_head[emask]]).sum()
    )
    if boundary == 0:
        return math.inf
    return size ** ((geom.d - 1) / geom.d) / boundary


def hls_ratio(f: SiteFunction, r: int) -> float:
    """Empirical constant of the pointwise kernel bound
    |f(x) - mean_r f| <= C * sum_e (1+|x-tail(e)|)^{-(d-1)} |grad f|(e).

    Returns the max over x in B_r of LHS/RHS (0/0 counted as 0).
    """
    geom = f.geometry
    smask = geom.site_mask(r)
    emask = geom.edge_mask(r)
    fbar = f.values[smask].mean()
    lhs = np.abs(f.values[smask] - fbar)
    g = np.abs(gradient(f).values[emask])
    tails = geom.edge_tail[emask]
    xs = geom.coords[smask].astype(np.float64)
    ts = geom.coords[tails].astype(np.float64)
    # pairwise |x - tail(e)| kept dense; corpora use moderate radii
    diff = xs[:, None, :] - ts[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    rhs = ((1.0 + dist) ** (-(geom.d - 1.0))) @ g
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lhs == 0.0, 0.0, lhs / rhs)
    return float(np.nanmax(ratio))


# ---------------------------------------------------------------------------
# lattice paths hugging the straight segment
# ---------------------------------------------------------------------------


def _segment_dist2(z, x, y) -> float:
    zx = z - x
    yx = y - x
    den = float((yx * yx).sum())
    if den == 0.0:
        return float((zx * zx).sum())
    t = float((zx * yx).sum()) / den
    t = min(1.0, max(0.0, t))
    res = zx - t * yx
    return float((res * res).sum())


def build_path(x, y, r: int | None = None) -> list[tuple]:
    """Nearest-neighbour path from x to y staying within sqrt(d) of the
    straight segment; ties in the greedy step resolved by the smallest
    coordinate index.  The path is coordinate-monotone, hence simple.
    """
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if r is not None and (np.abs(x).max() > r or np.abs(y).max() > r):
        raise ValueError("endpoints must lie in B_r")
    d = x.shape[0]
    sgn = np.sign(y - x)
    cur = x.astype(np.float64).copy()
    xf = x.astype(np.float64)
    yf = y.astype(np.float64)
    path = [tuple(int(c) for c in x)]
    while not np.array_equal(cur, yf):
        best_i = -1
        best_d = math.inf
        for i in range(d):
            if cur[i] == yf[i]:
                continue
            cur[i] += sgn[i]
            dd = _segment_dist2(cur, xf, yf)
            cur[i] -= sgn[i]
            if dd < best_d - 1e-9:
                best_d = dd
                best_i = i
        cur[best_i] += sgn[best_i]
        path.append(tuple(int(c) for c in cur))
    return path


def path_count(e: tuple, x, r: int) -> int:
    """|{y in B_r : edge e lies on the path from x to y}| by enumeration."""
    a, b = (tuple(e[0]), tuple(e[1]))
    key = (a, b) if a <= b else (b, a)
    x = tuple(int(c) for c in np.asarray(x))
    d = len(x)
    count = 0
    for y in np.ndindex(*([2 * r + 1] * d)):
        yy = tuple(int(c) - r for c in y)
        p = build_path(x, yy)
        for u, v in zip(p[:-1], p[1:]):
            ee = (u, v) if u <= v else (v, u)
            if ee == key:
                count += 1
                break
    return count


def opt_lemma(a: float, ap: float, b: float, c: float, A: float, B: float, D: float):
    """Closed-form three-term optimization.

    For positive exponents a, ap, b, c and coefficients A, B, D >= 0,
    returns (r, R, bound) with bound = 3 A^{bc/s} B^{ap*c/s} D^{ab/s},
    s = ab + ap*c + bc, and (r, R) the point where the three terms
    R^a r^ap A, r^-b B, R^-c D are all equal.  If any coefficient is zero
    the infimum is zero and (None, None, 0.0) is returned.
    """
    if min(a, ap, b, c) <= 0:
        raise ValueError("exponents must be positive")
    if min(A, B, D) < 0:
        raise ValueError("coefficients must be nonnegative")
    if A == 0.0 or B == 0.0 or D == 0.0:
        return None, None, 0.0
    sigma = a * b + ap * c + b * c
    r = (A ** (-c) * B ** (c + a) * D ** (-a)) ** (1.0 / sigma)
    R = (D / B) ** (1.0 / c) * r ** (b / c)
    bound = 3.0 * A ** (b * c / sigma) * B ** (ap * c / sigma) * D ** (a * b / sigma)
    return r, R, bound


# ---------------------------------------------------------------------------
# test-function corpus
# ---------------------------------------------------------------------------


def function_corpus(
    geom: LatticeGeometry,
    n: int,
    seed,
    kinds: tuple = ("gauss", "sparse", "indicator"),
    scale_with_box: bool = False,
):
    """Deterministic corpus of test profiles stressing smooth and rough
    regimes: Gaussian bumps with random center and width, sparse
    random-sign functions, and box indicators.

    With ``scale_with_box`` the centers and widths scale with L (for
    scale-invariance probes); otherwise they live in fixed absolute
    ranges so corpora at different L contain the same functions.
    """
    rng = np.random.default_rng(seed)
    cap = geom.L // 2 if scale_with_box else min(12, geom.L - 1)
    wmax = geom.L / 4 if scale_with_box else min(6.0, geom.L / 2)
    out = []
    coords = geom.coords.astype(np.float64)
    for i in range(n):
        kind = kinds[i % len(kinds)]
        if kind == "gauss":
            c = rng.integers(-cap, cap + 1, geom.d)
            width = math.exp(rng.uniform(math.log(0.8), math.log(wmax)))
            v = np.exp(-((coords - c) ** 2).sum(axis=1) / (2.0 * width**2))
            desc = f"gauss(center={tuple(int(z) for z in c)}, width={width:.3f})"
        elif kind == "sparse":
            k = int(rng.integers(1, 41))
            inside = np.nonzero(geom.site_radius <= cap)[0]
            sites = rng.choice(inside, size=min(k, inside.size), replace=False)
            v = np.zeros(geom.n_sites)
            v[sites] = rng.choice([-1.0, 1.0], size=sites.size)
            desc = f"sparse(k={sites.size})"
        elif kind == "indicator":
            half = rng.integers(1, cap + 1, geom.d)
            center = rng.integers(-cap // 2, cap // 2 + 1, geom.d)
            box = np.all(np.abs(geom.coords - center) <= half, axis=1)
            v = box.astype(np.float64)
            desc = f"indicator(center={tuple(int(z) for z in center)}, half={tuple(int(z) for z in half)})"
        else:
            raise ValueError(f"unknown corpus kind {kind!r}")
        if not np.any(v):
            v[geom.origin] = 1.0
        out.append((SiteFunction(geom, v), desc))
    return out
