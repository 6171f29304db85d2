"""Discrete domains on a uniform Cartesian grid.

Nodes sit at ``origin + (i*h, j*h)``.  Every node carries a region code
(interior, outside the outer boundary, inside a hole), and every interior
node carries, for each of its four arms (E, W, N, S), the fraction of ``h``
at which the arm meets the true boundary curve.  A fraction of 1 means the
neighbour along that arm is itself interior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

INTERIOR = 0
OUTER = 1
INNER = 2

# arm order: east, west, north, south
ARMS = ((1, 0), (-1, 0), (0, 1), (0, -1))
E, W, N, S = range(4)

_BISECT_STEPS = 60
_MARGIN = 3


class DomainError(ValueError):
    """Raised when a domain cannot be built at the requested resolution."""


# --------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class Stadium:
    """``{|y| < 1, |x| < a + cap(y)}`` with a concave even cap profile."""

    a: float
    cap: str = "circle"

    def cap_profile(self, y):
        y = np.asarray(y, dtype=float)
        inside = np.clip(1.0 - y * y, 0.0, None)
        if self.cap == "circle":
            return np.sqrt(inside)
        if self.cap == "parabola":
            return inside
        raise DomainError(f"unknown cap profile {self.cap!r}")

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (np.abs(y) < 1.0) & (np.abs(x) < self.a + self.cap_profile(y))

    @property
    def half_extents(self):
        return self.a + 1.0, 1.0

    def area(self):
        caps = np.pi if self.cap == "circle" else 8.0 / 3.0
        return 4.0 * self.a + caps


@dataclass(frozen=True)
class Disk:
    cx: float = 0.0
    cy: float = 0.0
    R: float = 1.0

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 < self.R**2

    def contains_closed(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (x - self.cx) ** 2 + (y - self.cy) ** 2 <= self.R**2

    def boundary_points(self, n=256):
        t = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        return np.column_stack([self.cx + self.R * np.cos(t), self.cy + self.R * np.sin(t)])

    def width(self):
        return 2.0 * self.R

    def area(self):
        return np.pi * self.R**2


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon given by counter-clockwise vertices."""

    vertices: tuple

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise DomainError("polygon needs at least three (x, y) vertices")
        signed = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if signed < 0:
            v = v[::-1]
        edges = np.roll(v, -1, axis=0) - v
        cross = edges[:, 0] * np.roll(edges[:, 1], -1) - edges[:, 1] * np.roll(edges[:, 0], -1)
        if np.any(cross < -1e-12):
            raise DomainError("polygon must be convex")
        object.__setattr__(self, "vertices", tuple(map(tuple, v)))

    def _halfplanes(self):
        v = np.asarray(self.vertices)
        e = np.roll(v, -1, axis=0) - v
        normals = np.column_stack([e[:, 1], -e[:, 0]])  # outward for ccw
        offsets = np.sum(normals * v, axis=1)
        return normals, offsets

    def _dist(self, x, y):
        normals, offsets = self._halfplanes()
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        vals = x[..., None] * normals[:, 0] + y[..., None] * normals[:, 1] - offsets
        return vals.max(axis=-1)

    def contains(self, x, y):
        return self._dist(x, y) < 0.0

    def contains_closed(self, x, y):
        return self._dist(x, y) <= 0.0

    def boundary_points(self, n=256):
        v = np.asarray(self.vertices)
        per = max(2, n // len(v))
        t = np.linspace(0.0, 1.0, per, endpoint=False)[:, None]
        pts = [v[k] + t * (v[(k + 1) % len(v)] - v[k]) for k in range(len(v))]
        return np.vstack(pts)

    def width(self):
        v = np.asarray(self.vertices)
        normals, _ = self._halfplanes()
        normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
        proj = v @ normals.T
        return float(np.min(proj.max(axis=0) - proj.min(axis=0)))

    def area(self):
        v = np.asarray(self.vertices)
        return 0.5 * abs(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))


@dataclass(frozen=True)
class Placed:
    """``x0 + eps * base`` for a base hole shape."""

    base: object
    x0: tuple
    eps: float

    def _pull(self, x, y):
        return (np.asarray(x, dtype=float) - self.x0[0]) / self.eps, (np.asarray(y, dtype=float) - self.x0[1]) / self.eps

    def contains(self, x, y):
        return self.base.contains(*self._pull(x, y))

    def contains_closed(self, x, y):
        return self.base.contains_closed(*self._pull(x, y))

    def boundary_points(self, n=256):
        return np.asarray(self.x0) + self.eps * self.base.boundary_points(n)

    def width(self):
        return self.eps * self.base.width()

    def area(self):
        return self.eps**2 * self.base.area()


# --------------------------------------------------------------------------
# grid domain


@dataclass(frozen=True, eq=False)
class GridDomain:
    origin: tuple
    h: float
    nx: int
    ny: int
    region: np.ndarray  # (nx, ny) int8
    arms: np.ndarray  # (4, nx, ny) cut fractions, 0 off the interior
    arm_label: np.ndarray  # (4, nx, ny) INTERIOR / OUTER / INNER
    outer: object
    hole: Optional[object] = None
    kind: str = "custom"
    _index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for arr in (self.region, self.arms, self.arm_label):
            arr.setflags(write=False)
        index = np.full((self.nx, self.ny), -1, dtype=np.int64)
        mask = self.region == INTERIOR
        index[mask] = np.arange(int(mask.sum()))
        index.setflags(write=False)
        object.__setattr__(self, "_index", index)

    # ---- node bookkeeping

    @property
    def interior_mask(self) -> np.ndarray:
        return self.region == INTERIOR

    @property
    def index(self) -> np.ndarray:
        """Interior numbering on the grid, -1 elsewhere (C order)."""
        return self._index

    @property
    def n_interior(self) -> int:
        return int(self.interior_mask.sum())

    @property
    def xs(self) -> np.ndarray:
        return self.origin[0] + np.arange(self.nx) * self.h

    @property
    def ys(self) -> np.ndarray:
        return self.origin[1] + np.arange(self.ny) * self.h

    def grid_coords(self):
        return np.meshgrid(self.xs, self.ys, indexing="ij")

    def interior_coords(self):
        X, Y = self.grid_coords()
        m = self.interior_mask
        return X[m], Y[m]

    def interior_ij(self):
        return np.nonzero(self.interior_mask)

    def interior_arms(self) -> np.ndarray:
        """Cut fractions, shape (4, n_interior)."""
        m = self.interior_mask
        return self.arms[:, m]

    def interior_arm_labels(self) -> np.ndarray:
        m = self.interior_mask
        return self.arm_label[:, m]

    def has_inner(self) -> bool:
        return self.hole is not None

    def region_of(self, x, y) -> np.ndarray:
        """Region code of arbitrary points, from the analytic shapes."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.full(np.broadcast(x, y).shape, OUTER, dtype=np.int8)
        inside = self.outer.contains(x, y)
        out[inside] = INTERIOR
        if self.hole is not None:
            out[inside & self.hole.contains_closed(x, y)] = INNER
        return out

    # ---- diagnostics

    def cell_areas(self) -> np.ndarray:
        """Cut-corrected control-volume areas of the interior nodes."""
        a = self.interior_arms()
        ext = np.where(a < 1.0, a, 0.5)
        return self.h**2 * (ext[E] + ext[W]) * (ext[N] + ext[S])

    def area(self) -> float:
        return float(self.cell_areas().sum())

    def boundary_components(self):
        """Label boundary-adjacent interior nodes by 8-connected component.

        Returns the label grid and a dict mapping component label to the
        boundary kind (OUTER or INNER) of the arms touching it.
        """
        touching = np.zeros((self.nx, self.ny), dtype=bool)
        kinds = np.zeros((self.nx, self.ny), dtype=np.int8)
        for k in range(4):
            lab = self.arm_label[k]
            hit = (lab != INTERIOR) & self.interior_mask
            touching |= hit
            kinds = np.where(hit, lab, kinds)
        labels, count = ndimage.label(touching, structure=np.ones((3, 3), dtype=int))
        kind_of = {}
        for c in range(1, count + 1):
            vals = np.unique(kinds[labels == c])
            kind_of[c] = int(vals[0]) if len(vals) == 1 else -1
        return labels, kind_of

    def is_connected(self) -> bool:
        _, count = ndimage.label(self.interior_mask)
        return count == 1

    def is_symmetric(self) -> bool:
        """Mask invariant under both axis reflections about the origin."""
        m = self.interior_mask
        centred = np.allclose(self.xs + self.xs[::-1], 0.0) and np.allclose(self.ys + self.ys[::-1], 0.0)
        return bool(centred and np.array_equal(m, m[::-1, :]) and np.array_equal(m, m[:, ::-1]))


def _classify(outer, hole, X, Y):
    region = np.full(X.shape, OUTER, dtype=np.int8)
    inside = outer.contains(X, Y)
    region[inside] = INTERIOR
    if hole is not None:
        region[inside & hole.contains_closed(X, Y)] = INNER
    return region


def _interior_predicate(outer, hole):
    if hole is None:
        return outer.contains
    return lambda x, y: outer.contains(x, y) & ~hole.contains_closed(x, y)


def _cut_fractions(outer, hole, origin, h, region):
    """Fraction of ``h`` along each arm to the boundary, by bisection."""
    nx, ny = region.shape
    arms = np.zeros((4,) + region.shape)
    labels = np.zeros((4,) + region.shape, dtype=np.int8)
    inside = _interior_predicate(outer, hole)
    interior = region == INTERIOR
    I, J = np.nonzero(interior)
    x = origin[0] + I * h
    y = origin[1] + J * h
    for k, (di, dj) in enumerate(ARMS):
        nreg = region[I + di, J + dj]
        frac = np.ones(len(I))
        cut = nreg != INTERIOR
        if np.any(cut):
            lo = np.zeros(int(cut.sum()))
            hi = np.ones_like(lo)
            xc, yc = x[cut], y[cut]
            for _ in range(_BISECT_STEPS):
                mid = 0.5 * (lo + hi)
                ok = inside(xc + mid * di * h, yc + mid * dj * h)
                lo = np.where(ok, mid, lo)
                hi = np.where(ok, hi, mid)
            frac[cut] = hi
        arms[k, I, J] = frac
        labels[k, I, J] = np.where(cut, nreg, INTERIOR)
    return arms, labels


def _assemble(outer, hole, origin, h, nx, ny, kind):
    xs = origin[0] + np.arange(nx) * h
    ys = origin[1] + np.arange(ny) * h
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    region = _classify(outer, hole, X, Y)
    if np.any(region[[0, -1], :] == INTERIOR) or np.any(region[:, [0, -1]] == INTERIOR):
        raise DomainError("interior touches the grid edge; enlarge the bounding box")
    arms, labels = _cut_fractions(outer, hole, origin, h, region)
    return GridDomain(origin=origin, h=h, nx=nx, ny=ny, region=region, arms=arms,
                      arm_label=labels, outer=outer, hole=hole, kind=kind)


def _centred_grid(half_x, half_y, h, cx=0.0, cy=0.0):
    mx = int(np.ceil(half_x / h)) + _MARGIN
    my = int(np.ceil(half_y / h)) + _MARGIN
    return (cx - mx * h, cy - my * h), 2 * mx + 1, 2 * my + 1


def build_stadium(a: float, h: float, cap: str = "circle") -> GridDomain:
    """Elongated stadium ``{|y|<1, |x|<a+cap(y)}`` on a grid centred at 0.

    The grid is symmetric about both axes node for node, and ``y = +-1``
    falls on grid lines whenever ``1/h`` is an integer.
    """
    if a < 1:
        raise DomainError(f"stadium half-length a={a} must be >= 1")
    if 2.0 / h < 16:
        raise DomainError(f"h={h} gives fewer than 16 nodes across the stadium height")
    shape = Stadium(float(a), cap)
    shape.cap_profile(0.0)
    hx, hy = shape.half_extents
    origin, nx, ny = _centred_grid(hx, hy, h)
    return _assemble(shape, None, origin, h, nx, ny, "stadium")


def build_disk_domain(center=(0.0, 0.0), R: float = 1.0, h: float = 1 / 64) -> GridDomain:
    if R <= 4 * h:
        raise DomainError(f"radius {R} must exceed 4h = {4 * h}")
    shape = Disk(float(center[0]), float(center[1]), float(R))
    origin, nx, ny = _centred_grid(R, R, h, *center)
    return _assemble(shape, None, origin, h, nx, ny, "disk")


def build_polygon_domain(vertices, h: float) -> GridDomain:
    """Convex polygon on a grid centred at the middle of its bounding box."""
    shape = ConvexPolygon(tuple(map(tuple, vertices)))
    v = np.asarray(shape.vertices)
    lo, hi = v.min(axis=0), v.max(axis=0)
    if shape.width() <= 4 * h:
        raise DomainError(f"polygon width {shape.width():.4g} must exceed 4h = {4 * h:.4g}")
    c = 0.5 * (lo + hi)
    origin, nx, ny = _centred_grid(0.5 * (hi[0] - lo[0]), 0.5 * (hi[1] - lo[1]), h, c[0], c[1])
    return _assemble(shape, None, origin, h, nx, ny, "polygon")


def _hole_shape(hole):
    if hole is None or hole == "disk":
        return Disk(0.0, 0.0, 1.0)
    if isinstance(hole, (Disk, ConvexPolygon)):
        return hole
    return ConvexPolygon(tuple(map(tuple, hole)))


def build_ring_domain(outer: GridDomain, x0, eps: float, hole="disk", h: Optional[float] = None) -> GridDomain:
    """``outer`` minus the closure of ``x0 + eps*hole``, on the same grid.

    Sharing the grid with ``outer`` lets fields on the ring be compared
    node for node with fields on the full domain.
    """
    if h is not None and not np.isclose(h, outer.h):
        raise DomainError("ring spacing must match the outer domain spacing")
    if outer.hole is not None:
        raise DomainError("outer domain already has a hole")
    if eps <= 0:
        raise DomainError("eps must be positive")
    h = outer.h
    placed = Placed(_hole_shape(hole), (float(x0[0]), float(x0[1])), float(eps))
    if placed.width() < 3 * h:
        raise DomainError(
            f"hole is {placed.width():.4g} across, below 3h = {3 * h:.4g}; refine h"
        )
    pts = placed.boundary_points(512)
    t = np.linspace(0.0, 2.0 * np.pi, 16, endpoint=False)
    dirs = 2.0 * h * np.column_stack([np.cos(t), np.sin(t)])
    probe = (pts[:, None, :] + dirs[None, :, :]).reshape(-1, 2)
    if not np.all(outer.outer.contains(pts[:, 0], pts[:, 1])) or not np.all(
        outer.outer.contains(probe[:, 0], probe[:, 1])
    ):
        raise DomainError("hole touches or leaves the outer domain (clearance 2h required)")
    return _assemble(outer.outer, placed, outer.origin, h, outer.nx, outer.ny, "ring")


@dataclass(frozen=True)
class SegmentSample:
    P: tuple
    Q: tuple
    points: np.ndarray

    @property
    def n(self) -> int:
        return len(self.points)


def sample_segment(P, Q, n: int) -> SegmentSample:
    """``n`` equally spaced points from ``P`` to ``Q``, endpoints exact."""
    if n < 2:
        raise ValueError("a segment sample needs n >= 2")
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = P + t * (Q - P)
    pts[0] = P
    pts[-1] = Q
    return SegmentSample(tuple(P), tuple(Q), pts)
