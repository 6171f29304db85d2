"""Superlevel sets, convexity tests and non-convexity witnesses."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError
from skimage import measure

from .elliptic import ScalarField
from .geometry import ARMS, INNER, INTERIOR, OUTER

DEFAULT_TOL = 5e-3


@dataclass(frozen=True, eq=False)
class SuperlevelSet:
    """``{u > lam}``: node membership and closed contour polylines (x, y)."""

    lam: float
    field: ScalarField
    node_set: np.ndarray
    contours: list

    @property
    def empty(self) -> bool:
        return not bool(self.node_set.any())

    def area(self) -> float:
        """Polygonal area enclosed by the contours (holes subtracted)."""
        if not self.contours:
            return 0.0
        signed = np.array([_signed_area(c) for c in self.contours])
        return float(abs(np.sum(signed * np.sign(signed[np.argmax(np.abs(signed))]))))

    def vertices(self) -> np.ndarray:
        return np.concatenate(self.contours) if self.contours else np.zeros((0, 2))


@dataclass(frozen=True)
class Witness:
    P: tuple
    Q: tuple
    R: tuple
    uP: float
    uQ: float
    uR: float
    lam: float

    def holds(self) -> bool:
        return self.uP > self.lam and self.uR > self.lam and self.uQ < self.lam


@dataclass(frozen=True)
class ConvexityReport:
    lam: float
    is_convex: bool
    hull_deficiency: float
    set_area: float
    hull_area: float
    witness: Optional[Witness] = None


@dataclass(frozen=True)
class ExtentReport:
    x_a: float
    y_a: float
    empty: bool


def _signed_area(c: np.ndarray) -> float:
    x, y = c[:, 0], c[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def contour_grid(u: ScalarField, lam: float) -> np.ndarray:
    """Full-grid values for contouring ``{u > lam}`` restricted to the domain.

    Exterior neighbours of interior nodes carry the linear extension through
    the boundary crossing, with the boundary value capped just below ``lam``
    so the set never leaks across the boundary; other exterior nodes carry
    the capped value itself.
    """
    d = u.domain
    below = lam - 1e-9 * max(1.0, abs(lam))
    cap = {c: min(u.bc[c], below) for c in (OUTER, INNER)}
    G = np.full((d.nx, d.ny), cap[OUTER])
    G[d.region == INNER] = cap[INNER]
    G[d.interior_mask] = u.values
    I, J = d.interior_ij()
    acc = np.zeros_like(G)
    cnt = np.zeros_like(G)
    for k, (di, dj) in enumerate(ARMS):
        lab = d.arm_label[k, I, J]
        cut = lab != INTERIOR
        if not np.any(cut):
            continue
        b = np.where(lab[cut] == INNER, cap[INNER], cap[OUTER])
        th = d.arms[k, I[cut], J[cut]]
        up = u.values[cut]
        np.add.at(acc, (I[cut] + di, J[cut] + dj), b + (up - b) * (1.0 - 1.0 / th))
        np.add.at(cnt, (I[cut] + di, J[cut] + dj), 1.0)
    hit = cnt > 0
    G[hit] = np.minimum(acc[hit] / cnt[hit], np.where(d.region[hit] == INNER, cap[INNER], cap[OUTER]))
    return G


def extract_superlevel(u: ScalarField, lam: float) -> SuperlevelSet:
    if not np.isfinite(lam):
        raise ValueError("level must be finite")
    d = u.domain
    nodes = u.values > lam
    contours = []
    if nodes.any():
        G = contour_grid(u, lam)
        # ties: nodes exactly at lam are outside the set
        G = np.where(G == lam, np.nextafter(lam, -np.inf), G)
        for c in measure.find_contours(G, lam):
            if len(c) < 4 or not np.allclose(c[0], c[-1]):
                continue
            xy = np.column_stack([d.origin[0] + c[:, 0] * d.h, d.origin[1] + c[:, 1] * d.h])
            contours.append(xy[:-1])
    return SuperlevelSet(float(lam), u, nodes, contours)


def _pt(p) -> tuple:
    return tuple(float(c) for c in p)


def _boundary_nodes(S: SuperlevelSet) -> np.ndarray:
    d = S.field.domain
    full = np.zeros((d.nx, d.ny), dtype=bool)
    full[d.interior_mask] = S.node_set
    edge = full & ~ndimage.binary_erosion(full, structure=np.ones((3, 3), bool))
    I, J = np.nonzero(edge)
    return np.column_stack([d.origin[0] + I * d.h, d.origin[1] + J * d.h])


def find_witness(S: SuperlevelSet, max_candidates: int = 400) -> Optional[Witness]:
    """Deepest midpoint dip among pairs of set nodes on the set's edge."""
    pts = _boundary_nodes(S)
    if len(pts) < 2:
        return None
    if len(pts) > max_candidates:
        pts = pts[np.linspace(0, len(pts) - 1, max_candidates).round().astype(int)]
    u = S.field
    vals = u.evaluate(pts)
    keep = vals > S.lam
    pts, vals = pts[keep], vals[keep]
    ia, ib = np.triu_indices(len(pts), k=2)
    if ia.size == 0:
        return None
    mids = 0.5 * (pts[ia] + pts[ib])
    um = u.evaluate(mids)
    k = int(np.argmin(um))
    if not um[k] < S.lam:
        return None
    P, R = pts[ia[k]], pts[ib[k]]
    return Witness(_pt(P), _pt(mids[k]), _pt(R), float(vals[ia[k]]), float(um[k]),
                   float(vals[ib[k]]), S.lam)


def convexity_report(S: SuperlevelSet, tol: float = DEFAULT_TOL) -> ConvexityReport:
    if S.empty or not S.contours:
        raise ValueError(f"superlevel set at {S.lam:g} is empty")
    verts = S.vertices()
    area = S.area()
    try:
        hull = ConvexHull(verts).volume
    except QhullError:
        hull = 0.0
    deficiency = (hull - area) / area if area > 0 else np.inf
    convex = bool(deficiency <= tol)
    witness = None if convex else find_witness(S)
    return ConvexityReport(S.lam, convex, float(deficiency), area, float(hull), witness)


@dataclass(frozen=True)
class LevelScan:
    reports: list
    nonconvex_levels: tuple = field(default=())

    @property
    def all_convex(self) -> bool:
        return not self.nonconvex_levels

    @property
    def window(self) -> Optional[tuple]:
        if not self.nonconvex_levels:
            return None
        return (min(self.nonconvex_levels), max(self.nonconvex_levels))

    def witnesses(self) -> list:
        return [r for r in self.reports if r.witness is not None and r.witness.holds()]


def scan_nonconvex_levels(u: ScalarField, lambdas: Sequence[float], tol: float = DEFAULT_TOL) -> LevelScan:
    lambdas = [float(l) for l in lambdas]
    if len(lambdas) < 2:
        raise ValueError("scan needs at least two levels")
    reports = []
    for lam in lambdas:
        S = extract_superlevel(u, lam)
        if S.empty or not S.contours:
            continue
        reports.append(convexity_report(S, tol))
    bad = tuple(r.lam for r in reports if not r.is_convex)
    return LevelScan(reports, bad)


def level_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """``n`` levels strictly inside (lo, hi)."""
    return np.linspace(lo, hi, n + 2)[1:-1]


def three_point_test(u: ScalarField, y_a: float, a: float, e: float = 0.05,
                     lam: Optional[float] = None) -> Witness:
    """Witness with P = (0, y_a (1 - 2e)), R = (a/2, 0), Q their midpoint.

    Without ``lam`` the level is centred between u(Q) and min(u(R), 1).
    """
    P = np.array([0.0, y_a * (1.0 - 2.0 * e)])
    R = np.array([0.5 * a, 0.0])
    Q = 0.5 * (P + R)
    uP, uQ, uR = u.evaluate(np.stack([P, Q, R]))
    if lam is None:
        lam = 0.5 * (uQ + min(uR, 1.0))
    return Witness(_pt(P), _pt(Q), _pt(R), float(uP), float(uQ), float(uR), float(lam))


@dataclass(frozen=True)
class SymmetryReport:
    asymmetry: float
    monotonicity_violation: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.asymmetry <= self.tol and self.monotonicity_violation <= self.tol


def symmetry_monotonicity_check(u: ScalarField, tol: float = 1e-6) -> SymmetryReport:
    """Evenness in x and y and decrease along grid rays leaving each axis."""
    d = u.domain
    if not d.is_symmetric():
        raise ValueError("domain is not symmetric under both axis reflections")
    G = u.grid()
    m = d.interior_mask
    asym = max(np.abs(G - G[::-1, :])[m].max(), np.abs(G - G[:, ::-1])[m].max())
    X, Y = d.grid_coords()
    worst = 0.0
    for axis, C in ((0, X), (1, Y)):
        step = np.diff(G, axis=axis)
        both = np.diff(m.astype(int), axis=axis) == 0
        both &= np.take(m, range(G.shape[axis] - 1), axis=axis)
        c0 = np.take(C, range(G.shape[axis] - 1), axis=axis)
        c1 = np.take(C, range(1, G.shape[axis]), axis=axis)
        tol_c = 1e-9 * d.h
        up = both & (c0 >= -tol_c)  # moving outward in +direction: must not increase
        down = both & (c1 <= tol_c)  # moving outward in -direction: must not increase
        if up.any():
            worst = max(worst, float(np.maximum(step[up], 0).max()))
        if down.any():
            worst = max(worst, float(np.maximum(-step[down], 0).max()))
    return SymmetryReport(float(asym), worst, tol)


def profile_deviation(u: ScalarField, region: tuple) -> float:
    """``sup |u(x, y) - (1 - y^2)/2|`` over nodes with x in ``region``."""
    x, y = u.domain.interior_coords()
    m = (x >= region[0]) & (x <= region[1])
    if not m.any():
        raise ValueError(f"no interior nodes with x in {region}")
    return float(np.abs(u.values[m] - 0.5 * (1 - y[m] ** 2)).max())


@dataclass(frozen=True)
class SqrtConcavityReport:
    passed: bool
    max_eigenvalue: float
    worst_point: tuple
    tested: int
    slack: float


def sqrt_concavity_check(v: ScalarField, margin: float, slack: float = 1e-3) -> SqrtConcavityReport:
    """Largest eigenvalue of the discrete Hessian of ``sqrt v`` away from the boundary."""
    d = v.domain
    h = d.h
    dist = ndimage.distance_transform_edt(d.interior_mask) * h
    test = d.interior_mask & (dist >= margin - 1e-12)
    test[[0, -1], :] = False
    test[:, [0, -1]] = False
    if not test.any():
        raise ValueError("no nodes beyond the margin")
    G = v.grid()
    if np.any(G[test] <= 0):
        raise ValueError("field is not positive on the tested nodes")
    with np.errstate(invalid="ignore"):
        s = np.sqrt(np.maximum(G, 0.0))
    I, J = np.nonzero(test)
    sxx = (s[I + 1, J] - 2 * s[I, J] + s[I - 1, J]) / h**2
    syy = (s[I, J + 1] - 2 * s[I, J] + s[I, J - 1]) / h**2
    sxy = (s[I + 1, J + 1] - s[I + 1, J - 1] - s[I - 1, J + 1] + s[I - 1, J - 1]) / (4 * h**2)
    lam_max = 0.5 * (sxx + syy) + np.sqrt(0.25 * (sxx - syy) ** 2 + sxy**2)
    k = int(np.argmax(lam_max))
    worst = (d.origin[0] + I[k] * h, d.origin[1] + J[k] * h)
    return SqrtConcavityReport(bool(lam_max[k] <= slack), float(lam_max[k]), worst, int(I.size), slack)


def superlevel_extent(u: ScalarField, lam: float = 1.0) -> ExtentReport:
    """``sup |x|`` and ``sup |y|`` over ``{u > lam}`` from its contours."""
    S = extract_superlevel(u, lam)
    if S.empty:
        return ExtentReport(0.0, 0.0, True)
    V = S.vertices()
    if len(V) == 0:
        x, y = u.domain.interior_coords()
        V = np.column_stack([x[S.node_set], y[S.node_set]])
    return ExtentReport(float(np.abs(V[:, 0]).max()), float(np.abs(V[:, 1]).max()), False)
