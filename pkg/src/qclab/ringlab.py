"""Semilinear problems on convex rings with a small off-centre hole.

A base solution ``v`` on the convex domain is computed first; the hole is
then placed where ``v`` is well below its maximum and the ring problem is
solved with the value ``M >= max v`` on the hole's boundary.  As the hole
shrinks the ring solution approaches ``v`` away from the hole, while its
extension by ``M`` keeps a plateau at the hole: the segment from the hole to
the maximum point of ``v`` then dips below both ends.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .elliptic import (BracketError, CoefficientField, NonlinearitySpec, NonlinearOptions,
                       ScalarField, assemble_operator, monotone_semilinear_solve,
                       nonlinear_residual, principal_eigenpair, restrict, solve_torsion)
from .geometry import INNER, INTERIOR, OUTER, Disk, GridDomain, _assemble, build_ring_domain, sample_segment
from .quasiconcavity import ConvexityReport, Witness, _pt, convexity_report, extract_superlevel

log = logging.getLogger(__name__)


class HypothesisError(ValueError):
    """The nonlinearity fails the standing assumptions (with the measured quantity)."""

    def __init__(self, msg, measured=None):
        super().__init__(msg)
        self.measured = measured


# --------------------------------------------------------------------------
# base problem


@dataclass(frozen=True, eq=False)
class BaseSolution:
    v: ScalarField
    M0: float
    psi: ScalarField
    sub: ScalarField
    sup: ScalarField
    delta: float
    D: float
    lambda1: Optional[float]
    uniqueness_gap: float
    sweeps: int
    residual: float


def check_hypotheses(omega1: GridDomain, coeffs: CoefficientField, f: NonlinearitySpec):
    """Return ``lambda1(-(L + zeta))`` when f(., 0) = 0, else None; raise on failure."""
    x, y = omega1.interior_coords()
    stride = max(1, len(x) // 50)
    if not f.ratio_nonincreasing(x[::stride], y[::stride]):
        raise HypothesisError("s -> f(x, s)/s is not nonincreasing")
    if f.zero_at_zero:
        ep = principal_eigenpair(omega1, coeffs, zeta=f.zeta(x, y))
        if ep.lambda1 >= 0:
            lam0 = principal_eigenpair(omega1, coeffs).lambda1
            raise HypothesisError(
                f"no positive solution: lambda1(-(L+zeta)) = {ep.lambda1:.6g} >= 0 "
                f"(lambda1(-L) = {lam0:.6g})", measured=lam0)
        return ep
    f0 = f(x, y, np.zeros_like(x))
    if f0.max() <= 0:
        raise HypothesisError("f(., 0) <= 0 and f(., 0) is not identically zero")
    return None


def _bump(omega1: GridDomain, coeffs, f, centre_node):
    """Principal eigenfunction of -L on a ball where f(., 0) > 0, extended by 0."""
    x, y = omega1.interior_coords()
    f0 = f(x, y, np.zeros_like(x))
    from scipy import ndimage

    dist = ndimage.distance_transform_edt(omega1.interior_mask)[omega1.interior_mask] * omega1.h
    score = np.where(f0 > 0, dist, -np.inf)
    k = int(np.argmax(score)) if centre_node is None else centre_node
    r = 0.5 * dist[k]
    ball = _assemble(Disk(float(x[k]), float(y[k]), float(r)), None, omega1.origin, omega1.h,
                     omega1.nx, omega1.ny, "disk")
    phi = principal_eigenpair(ball, coeffs).phi
    full = phi.grid()
    return full[omega1.interior_mask]


def _pick_delta(op, f, phi_vals, sup_vals, bc, delta0, tol_feas, scale, max_halvings=60):
    x, y = op.domain.interior_coords()
    delta = delta0
    for _ in range(max_halvings):
        sub = delta * phi_vals
        r = nonlinear_residual(op, f, sub, bc, (x, y))
        if r.min() >= -tol_feas * scale and np.all(sub <= sup_vals):
            return delta
        delta *= 0.5
    raise BracketError("no feasible subsolution scale found")


def solve_base_problem(omega1: GridDomain, coeffs: Optional[CoefficientField], f: NonlinearitySpec,
                       opts: NonlinearOptions = NonlinearOptions()) -> BaseSolution:
    coeffs = coeffs or CoefficientField.laplacian()
    ep = check_hypotheses(omega1, coeffs, f)
    op = assemble_operator(omega1, coeffs)
    psi = solve_torsion(omega1, op=op)
    D = 1.1 * max(f.sup, 1e-12)
    sup = psi.with_values(D * psi.values)
    phi = ep.phi.values if ep is not None else _bump(omega1, coeffs, f, None)
    bc = {OUTER: 0.0, INNER: 0.0}
    scale = max(1.0, float(sup.values.max()))
    delta = _pick_delta(op, f, phi, sup.values, bc, 0.1 * sup.values.max() / phi.max(),
                        opts.tol_feas, scale)
    sub = psi.with_values(delta * phi)
    down = monotone_semilinear_solve(omega1, coeffs, f, sub, sup, bc, opts, "super", op=op)
    up = monotone_semilinear_solve(omega1, coeffs, f, sub, sup, bc, opts, "sub", op=op, K=down.K)
    gap = float(np.abs(down.u.values - up.u.values).max())
    return BaseSolution(down.u, down.u.max(), psi, sub, sup, delta, D,
                        None if ep is None else ep.lambda1, gap, down.sweeps, down.residual)


def select_hole_center(v: ScalarField, ratio: float = 0.5, clearance: Optional[float] = None) -> tuple:
    """Walk along +x from the argmax of ``v`` until ``v <= ratio * max v``."""
    d = v.domain
    if v.max() - v.min() <= 1e-12 * max(1.0, abs(v.max())):
        raise ValueError("field is flat: no point with v(x0) below its maximum")
    clearance = 4 * d.h if clearance is None else clearance
    I, J = d.interior_ij()
    k = int(np.argmax(v.values))
    i, j = int(I[k]), int(J[k])
    G = v.grid()
    target = ratio * v.max()
    while d.interior_mask[i + 1, j]:
        i += 1
        if G[i, j] <= target:
            x0 = (float(d.origin[0] + i * d.h), float(d.origin[1] + j * d.h))
            pts = d.outer.boundary_points(2048)
            if np.hypot(pts[:, 0] - x0[0], pts[:, 1] - x0[1]).min() < clearance:
                break
            return x0
    raise ValueError(f"no node with v <= {ratio:g} max v at clearance {clearance:g} on the +x ray")


def argmax_point(v: ScalarField) -> tuple:
    """Grid argmax; ties go to the smallest lexicographic node index."""
    d = v.domain
    I, J = d.interior_ij()
    k = int(np.argmax(v.values))
    return (float(d.origin[0] + I[k] * d.h), float(d.origin[1] + J[k] * d.h))


# --------------------------------------------------------------------------
# ring problem


@dataclass(frozen=True, eq=False)
class RingProblem:
    omega1: GridDomain
    f: NonlinearitySpec
    x0: tuple
    eps: float
    M: float
    M0: float
    coeffs: CoefficientField = field(default_factory=CoefficientField.laplacian)
    hole: object = "disk"

    def __post_init__(self):
        if self.M < self.M0:
            raise ValueError(f"M = {self.M:g} is below M0 = max v = {self.M0:g}")


@dataclass(frozen=True, eq=False)
class RingSolution:
    problem: RingProblem
    u: ScalarField
    ubar: ScalarField
    sub: ScalarField
    sup: ScalarField
    delta: float
    D: float
    residual: float
    uniqueness_gap: float
    sweeps: int
    bracket_margin: tuple  # (min over sweeps of u - sub, of sup - u)


def extend_by_hole(u: ScalarField, omega1: GridDomain, M: float) -> ScalarField:
    """The field on the full domain equal to M on the hole."""
    ring = u.domain
    full = np.full((ring.nx, ring.ny), float(M))
    full[ring.interior_mask] = u.values
    return ScalarField(omega1, full[omega1.interior_mask], {OUTER: 0.0})


def solve_ring_problem(p: RingProblem, opts: NonlinearOptions = NonlinearOptions(),
                       two_sided: bool = True, base: Optional[BaseSolution] = None) -> RingSolution:
    omega1, f, M = p.omega1, p.f, float(p.M)
    ring = build_ring_domain(omega1, p.x0, p.eps, p.hole)
    coeffs = p.coeffs
    op = assemble_operator(ring, coeffs)
    x1, y1 = omega1.interior_coords()
    psi = base.psi if base is not None else solve_torsion(omega1, coeffs)
    if f.zero_at_zero:
        phi = principal_eigenpair(omega1, coeffs, zeta=f.zeta(x1, y1)).phi.values
    else:
        phi = _bump(omega1, coeffs, f, None)
    hole_pts = ring.hole.boundary_points(512)
    psi_min = float(psi.evaluate(hole_pts).min())
    D = 1.1 * max(f.sup, M / psi_min)
    bc = {OUTER: 0.0, INNER: M}
    sup = restrict(psi, ring, bc).values * D
    phi_r = restrict(ScalarField(omega1, phi), ring).values
    scale = max(1.0, M, float(sup.max()))
    delta = _pick_delta(op, f, phi_r, sup, bc, 0.1 * M / phi.max(), opts.tol_feas, scale)
    sub_f = ScalarField(ring, delta * phi_r, bc)
    sup_f = ScalarField(ring, sup, bc)

    margins = [np.inf, np.inf]

    def track(_, u):
        margins[0] = min(margins[0], float((u - sub_f.values).min()))
        margins[1] = min(margins[1], float((sup_f.values - u).min()))

    down = monotone_semilinear_solve(ring, coeffs, f, sub_f, sup_f, bc, opts, "super", op=op, on_sweep=track)
    gap = np.nan
    if two_sided:
        up = monotone_semilinear_solve(ring, coeffs, f, sub_f, sup_f, bc, opts, "sub", op=op, K=down.K,
                                       on_sweep=track)
        gap = float(np.abs(down.u.values - up.u.values).max())
    ubar = extend_by_hole(down.u, omega1, M)
    log.info("ring eps=%g: %d sweeps, gap %.2e, D=%.4g delta=%.3g", p.eps, down.sweeps, gap, D, delta)
    return RingSolution(p, down.u, ubar, sub_f, sup_f, delta, D, down.residual, gap, down.sweeps,
                        tuple(margins))


@dataclass(frozen=True)
class ConvergenceTable:
    eps: tuple
    gaps: tuple
    r0: float

    @property
    def strictly_decreasing(self) -> bool:
        """Gaps shrink strictly as eps shrinks."""
        order = np.argsort(self.eps)[::-1]
        g = np.asarray(self.gaps)[order]
        return bool(np.all(np.diff(g) < 0))

    @property
    def smallest_eps_gap(self) -> float:
        return float(self.gaps[int(np.argmin(self.eps))])


def exterior_gap(ubar: ScalarField, v: ScalarField, x0, r0: float) -> float:
    """``max |ubar - v|`` over nodes outside ``B(x0, r0)``."""
    x, y = v.domain.interior_coords()
    far = np.hypot(x - x0[0], y - x0[1]) >= r0
    return float(np.abs(ubar.values[far] - v.values[far]).max())


def epsilon_convergence_study(base: BaseSolution, f: NonlinearitySpec, x0, eps_list: Sequence[float],
                              r0: float, M: Optional[float] = None,
                              coeffs: Optional[CoefficientField] = None, hole="disk",
                              opts: NonlinearOptions = NonlinearOptions(), two_sided: bool = True):
    """Solve the ring problem for each eps and tabulate the gap to ``v`` off B(x0, r0)."""
    omega1 = base.v.domain
    coeffs = coeffs or CoefficientField.laplacian()
    M = base.M0 if M is None else M
    sols, gaps = [], []
    for eps in eps_list:
        p = RingProblem(omega1, f, tuple(x0), float(eps), M, base.M0, coeffs, hole)
        if eps * p_width(hole) / 2 >= r0:
            raise ValueError(f"exclusion radius {r0} does not cover the hole at eps={eps}")
        s = solve_ring_problem(p, opts, two_sided, base)
        sols.append(s)
        gaps.append(exterior_gap(s.ubar, base.v, x0, r0))
    return ConvergenceTable(tuple(map(float, eps_list)), tuple(gaps), float(r0)), sols


def p_width(hole) -> float:
    from .geometry import _hole_shape

    return _hole_shape(hole).width()


@dataclass(frozen=True)
class RingWitness:
    found: bool
    lam: Optional[float]
    witness: Optional[Witness]
    report: Optional[ConvexityReport]
    dip: float
    top: float
    note: str = ""


def ring_nonconvexity_witness(ubar: ScalarField, v: ScalarField, x0, M: float, n: Optional[int] = None,
                              margin: float = 1e-6) -> RingWitness:
    """Dip of ``ubar`` on the segment from the hole centre to the maximum point of ``v``."""
    yv = argmax_point(v)
    h = ubar.domain.h
    if n is None:
        n = max(2, int(np.ceil(4 * np.hypot(yv[0] - x0[0], yv[1] - x0[1]) / h)) + 1)
    seg = sample_segment(x0, yv, n)
    vals = ubar.evaluate(seg.points)
    k = int(np.argmin(vals))
    m = float(vals[k])
    top = min(M, float(vals[-1]), float(vals[0]))
    if not m < top - margin:
        return RingWitness(False, None, None, None, m, top, "no witness at this eps")
    lam = 0.5 * (m + top)
    w = Witness(_pt(seg.points[0]), _pt(seg.points[k]), _pt(seg.points[-1]),
                float(vals[0]), m, float(vals[-1]), lam)
    rep = convexity_report(extract_superlevel(ubar, lam))
    return RingWitness(w.holds(), lam, w, rep, m, top)
