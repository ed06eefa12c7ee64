"""Discrete geometry and calculus on centered boxes of Z^d.

The working domain is the box B_L = {-L,...,L}^d with the edge set E_L of
nearest-neighbour pairs whose endpoints both lie in B_L (zero-flux
convention: edges crossing the box boundary simply do not exist).  Sites
are enumerated row-major over coordinates, edges axis-major then
site-major, so every site and edge has a stable integer id.

Functions on sites (heat kernels, test functions) and on edges
(conductances, weights) are stored as flat numpy arrays wrapped together
with their geometry.  All containers are immutable after construction and
safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LatticeGeometry",
    "SiteFunction",
    "EdgeField",
    "anchored_weight",
    "lp_norm",
    "gradient",
    "box_average",
    "box_median",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LatticeGeometry:
    """The box B_L in Z^d with its interior edge set.

    ``periodic=True`` additionally appends the wrap-around edges of the
    torus of side 2L+1 after the box edges, so box edge ids are a prefix
    of the torus edge ids.
    """

    d: int
    L: int
    periodic: bool = False
    coords: np.ndarray = field(init=False, repr=False)       # (n_sites, d) int64
    edge_tail: np.ndarray = field(init=False, repr=False)    # (n_edges,) int64
    edge_head: np.ndarray = field(init=False, repr=False)
    edge_axis: np.ndarray = field(init=False, repr=False)
    site_radius: np.ndarray = field(init=False, repr=False)  # sup-norm per site
    edge_radius: np.ndarray = field(init=False, repr=False)  # min box radius containing the edge
    euclid: np.ndarray = field(init=False, repr=False)       # Euclidean norm per site
    anchored: np.ndarray = field(init=False, repr=False)     # |x|_* per site

    def __post_init__(self):
        if not (1 <= self.d <= 3):
            raise ValueError(f"dimension must be 1..3, got {self.d}")
        if self.L < 1:
            raise ValueError(f"box radius must be >= 1, got {self.L}")
        d, L = self.d, self.L
        side = 2 * L + 1
        axes = [np.arange(-L, L + 1)] * d
        mesh = np.meshgrid(*axes, indexing="ij")
        coords = np.stack([m.ravel() for m in mesh], axis=1).astype(np.int64)
        n = side**d

        strides = np.array([side ** (d - 1 - i) for i in range(d)], dtype=np.int64)

        tails, heads, axes_of = [], [], []
        for i in range(d):
            inner = coords[:, i] < L
            t = np.nonzero(inner)[0]
            tails.append(t)
            heads.append(t + strides[i])
            axes_of.append(np.full(t.shape[0], i, dtype=np.int64))
        if self.periodic:
            for i in range(d):
                rim = np.nonzero(coords[:, i] == L)[0]
                tails.append(rim)
                heads.append(rim - 2 * L * strides[i])
                axes_of.append(np.full(rim.shape[0], i, dtype=np.int64))
        tail = np.concatenate(tails)
        head = np.concatenate(heads)
        axis = np.concatenate(axes_of)

        sup = np.abs(coords).max(axis=1)
        euclid = np.sqrt((coords.astype(np.float64) ** 2).sum(axis=1))

        object.__setattr__(self, "coords", _readonly(coords))
        object.__setattr__(self, "edge_tail", _readonly(tail))
        object.__setattr__(self, "edge_head", _readonly(head))
        object.__setattr__(self, "edge_axis", _readonly(axis))
        object.__setattr__(self, "site_radius", _readonly(sup))
        # wrap edges never belong to any centered sub-box of the plain box
        erad = np.maximum(sup[tail], sup[head])
        if self.periodic:
            n_box = d * side ** (d - 1) * 2 * L
            erad = erad.copy()
            erad[n_box:] = L + 1
        object.__setattr__(self, "edge_radius", _readonly(erad))
        object.__setattr__(self, "euclid", _readonly(euclid))
        object.__setattr__(self, "anchored", _readonly(np.maximum(euclid, 1.0)))
        assert n == coords.shape[0]

    @property
    def n_sites(self) -> int:
        return (2 * self.L + 1) ** self.d

    @property
    def n_edges(self) -> int:
        return self.edge_tail.shape[0]

    @property
    def n_box_edges(self) -> int:
        """Number of edges interior to B_L (excludes wrap edges)."""
        return self.d * (2 * self.L + 1) ** (self.d - 1) * 2 * self.L

    @property
    def origin(self) -> int:
        return (self.n_sites - 1) // 2

    def site_index(self, x) -> int:
        x = np.asarray(x, dtype=np.int64)
        if x.shape != (self.d,) or np.abs(x).max() > self.L:
            raise ValueError(f"{x!r} is not a site of B_{self.L} in d={self.d}")
        side = 2 * self.L + 1
        idx = 0
        for i in range(self.d):
            idx = idx * side + (int(x[i]) + self.L)
        return idx

    def site_mask(self, r: int) -> np.ndarray:
        """Boolean mask of sites belonging to B_r."""
        if r > self.L:
            raise ValueError(f"r={r} exceeds box radius L={self.L}")
        return self.site_radius <= r

    def edge_mask(self, r: int) -> np.ndarray:
        """Boolean mask of edges belonging to E_r (both endpoints in B_r)."""
        if r > self.L:
            raise ValueError(f"r={r} exceeds box radius L={self.L}")
        return self.edge_radius <= r

    def incident_box_edges(self):
        """CSR arrays (ptr, edge_ids) of box edges incident to each site."""
        n_box = self.n_box_edges
        cnt = np.zeros(self.n_sites, dtype=np.int64)
        np.add.at(cnt, self.edge_tail[:n_box], 1)
        np.add.at(cnt, self.edge_head[:n_box], 1)
        ptr = np.zeros(self.n_sites + 1, dtype=np.int64)
        np.cumsum(cnt, out=ptr[1:])
        out = np.empty(ptr[-1], dtype=np.int64)
        fill = ptr[:-1].copy()
        for e in range(n_box):
            t, h = self.edge_tail[e], self.edge_head[e]
            out[fill[t]] = e
            fill[t] += 1
            out[fill[h]] = e
            fill[h] += 1
        return ptr, out


@dataclass(frozen=True)
class SiteFunction:
    """A real-valued function on the sites of B_L."""

    geometry: LatticeGeometry
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.geometry.n_sites,):
            raise ValueError(
                f"expected {self.geometry.n_sites} site values, got {v.shape}"
            )
        object.__setattr__(self, "values", _readonly(v.copy()))

    @classmethod
    def delta(cls, geom: LatticeGeometry, site: int | None = None) -> "SiteFunction":
        v = np.zeros(geom.n_sites)
        v[geom.origin if site is None else site] = 1.0
        return cls(geom, v)


@dataclass(frozen=True)
class EdgeField:
    """A real-valued function on the edges of B_L (conductances, weights)."""

    geometry: LatticeGeometry
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.geometry.n_edges,):
            raise ValueError(
                f"expected {self.geometry.n_edges} edge values, got {v.shape}"
            )
        object.__setattr__(self, "values", _readonly(v.copy()))

    @classmethod
    def constant(cls, geom: LatticeGeometry, c: float) -> "EdgeField":
        return cls(geom, np.full(geom.n_edges, float(c)))


def anchored_weight(x) -> float:
    """|x|_* = max(|x|, 1) with |.| the Euclidean norm."""
    x = np.asarray(x, dtype=np.float64)
    return max(float(np.sqrt((x**2).sum())), 1.0)


def _values_and_mask(f, r):
    geom = f.geometry
    if isinstance(f, SiteFunction):
        return f.values, geom.site_mask(geom.L if r is None else r)
    return f.values, geom.edge_mask(geom.L if r is None else r)


def lp_norm(f, p: float, r: int | None = None) -> float:
    """l^p norm of f over B_r (site functions) or E_r (edge fields).

    p = inf gives the max of |f|; r defaults to the full box radius.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    v, mask = _values_and_mask(f, r)
    v = np.abs(v[mask])
    if v.size == 0:
        return 0.0
    if math.isinf(p):
        return float(v.max())
    if p == 1:
        return float(v.sum())
    if p == 2:
        return float(np.sqrt((v * v).sum()))
    return float((v**p).sum() ** (1.0 / p))


def gradient(f: SiteFunction) -> EdgeField:
    """Signed per-edge difference along the positive axis orientation."""
    g = f.geometry
    return EdgeField(g, f.values[g.edge_head] - f.values[g.edge_tail])


def box_average(f: SiteFunction, r: int | None = None) -> float:
    v, mask = _values_and_mask(f, r)
    return float(v[mask].mean())


def box_median(f: SiteFunction, r: int | None = None) -> float:
    """Lower median: element at index floor((n-1)/2) of the sorted values."""
    v, mask = _values_and_mask(f, r)
    s = np.sort(v[mask])
    return float(s[(s.size - 1) // 2])
