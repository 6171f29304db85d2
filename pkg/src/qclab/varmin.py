"""Constrained minimisation of the Dirichlet-torsion energy.

Minimises ``I(u) = 1/2 |grad u|^2 - int u`` (zero boundary data) over
``{int g(u) = 1}``.  Critical points satisfy

    Lap u + 1 + mu g'(u) = 0,

and the returned field is checked against the pointwise bounds that hold for
the true minimiser.  Integrals over the domain use the node rule ``h^2 sum``;
the constraint only sees nodes where ``u > 1``, which stay far from the
boundary, so cut cells do not enter it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cutoff import CutoffFunction
from .elliptic import (CoefficientField, DiscreteOperator, ScalarField, SolverError,
                       assemble_operator, solve_torsion)
from .geometry import GridDomain

log = logging.getLogger(__name__)


class DegenerateConstraint(RuntimeError):
    """g'(u) vanished identically: the constraint has no normal direction."""


@dataclass(frozen=True)
class VarminOptions:
    tol: float = 1e-8
    max_steps: int = 4000
    semi_implicit: bool = True
    tau: float = 1.0
    constraint_tol: float = 1e-10
    newton_switch: float = 1e-4
    max_newton: int = 30


@dataclass(frozen=True)
class VariationalResult:
    u: ScalarField
    mu: float
    energy: float
    constraint_residual: float
    el_residual: float
    iterations: int
    newton_steps: int
    t_a: float
    history: tuple = field(default=(), repr=False)


def _mass(g: CutoffFunction, u: np.ndarray, h2: float) -> float:
    return h2 * float(np.sum(g.value(np.maximum(u, 0.0))))


def constraint_scale(v: ScalarField, g: CutoffFunction, tol: float = 1e-10) -> float:
    """Scaling ``t`` with ``h^2 sum g(t v) = 1``.

    The map ``t -> sum g(t v)`` is continuous and nondecreasing and saturates
    at the measure of ``{v > 0}``; the root is bracketed by doubling and found
    by bisection with Newton acceleration.
    """
    vals = v.values
    h2 = v.domain.h ** 2
    vmax = float(vals.max())
    if vmax <= 0:
        raise ValueError("constraint scaling needs a field that is positive somewhere")
    if h2 * np.count_nonzero(vals > 0) <= 1.0:
        raise ValueError("domain too small: int g(t v) stays below 1 for every t")

    def F(t):
        return _mass(g, t * vals, h2) - 1.0

    lo, hi = 1.0 / vmax, 2.0 / vmax  # F(lo) = -1
    while F(hi) < 0:
        lo, hi = hi, 2.0 * hi
        if hi * vmax > 1e12:
            raise ValueError("constraint scaling diverged (v too concentrated)")
    t = 0.5 * (lo + hi)
    for _ in range(200):
        r = F(t)
        if abs(r) <= tol:
            return t
        if r < 0:
            lo = t
        else:
            hi = t
        dr = h2 * float(np.sum(g.derivative(t * vals) * vals))
        step = t - r / dr if dr > 0 else np.nan
        t = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * hi:
            break
    if abs(F(t)) > tol:
        raise SolverError("constraint scaling failed", abs(F(t)))
    return t


def _restore(g, u, h2, tol, max_iter=60):
    """Move ``u`` along ``g'(u)`` until the constraint holds."""
    d = g.derivative(u)
    if not np.any(d > 0):
        raise DegenerateConstraint("g'(u) is identically zero")
    lo, hi = None, None
    s = 0.0
    for _ in range(max_iter):
        w = u + s * d
        r = _mass(g, w, h2) - 1.0
        if abs(r) <= tol:
            return w
        if r < 0:
            lo = s
        else:
            hi = s
        dr = h2 * float(np.sum(g.derivative(w) * d))
        new = s - r / dr if dr > 0 else np.nan
        if lo is not None and hi is not None:
            if not (lo < new < hi):
                new = 0.5 * (lo + hi)
        elif not np.isfinite(new):
            new = s + (1.0 if r < 0 else -1.0) * (abs(s) + 1e-3)
        s = new
    raise SolverError("constraint restoration failed", abs(r))


def energy(op: DiscreteOperator, u: np.ndarray) -> float:
    h2 = op.domain.h ** 2
    return h2 * float(-0.5 * u @ (op.matrix @ u) - u.sum())


def el_residual(op: DiscreteOperator, g: CutoffFunction, u: np.ndarray, mu: float) -> np.ndarray:
    return op.matrix @ u + 1.0 + mu * g.derivative(u)


def multiplier(op: DiscreteOperator, g: CutoffFunction, u: np.ndarray) -> float:
    """Least-squares multiplier: ``argmin_mu |Lap u + 1 + mu g'(u)|``."""
    gp = g.derivative(u)
    nrm = float(gp @ gp)
    if nrm == 0.0:
        raise DegenerateConstraint("g'(u) is identically zero")
    return -float((op.matrix @ u + 1.0) @ gp) / nrm


def _newton_polish(op, g, u, mu, tol, max_iter):
    """Newton on the bordered system for (u, mu)."""
    h2 = op.domain.h ** 2
    n = op.n
    for it in range(max_iter):
        F = el_residual(op, g, u, mu)
        c = _mass(g, u, h2) - 1.0
        if np.abs(F).max() <= tol and abs(c) <= 1e-12:
            return u, mu, it
        gp = g.derivative(u)
        J = op.matrix + sp.diags(mu * g.second_derivative(u))
        K = sp.bmat([[J, sp.csr_matrix(gp[:, None])],
                     [sp.csr_matrix(h2 * gp[None, :]), None]], format="csc")
        delta = spla.spsolve(K, -np.concatenate([F, [c]]))
        u = u + delta[:n]
        mu = mu + delta[n]
    F = el_residual(op, g, u, mu)
    if np.abs(F).max() > tol:
        raise SolverError("Newton polish did not converge", float(np.abs(F).max()))
    return u, mu, max_iter


def constrained_minimize(domain: GridDomain, g: CutoffFunction,
                         opts: VarminOptions = VarminOptions(),
                         v: Optional[ScalarField] = None,
                         u0: Optional[np.ndarray] = None) -> VariationalResult:
    """Projected gradient descent from ``t_a v_a`` followed by a Newton polish.

    The descent direction is the (preconditioned) residual ``Lap u + 1``
    with the component along ``g'(u)`` removed, so steps are tangent to the
    constraint; a scalar correction along ``g'(u)`` then restores it.  The
    semi-implicit variant preconditions with ``(I - tau Lap)^{-1}``, the
    explicit one uses the step ``h^2/4``.
    """
    op = assemble_operator(domain, CoefficientField.laplacian())
    h2 = domain.h ** 2
    if v is None:
        v = solve_torsion(domain, op=op)
    t_a = constraint_scale(v, g)
    u = t_a * v.values if u0 is None else np.asarray(u0, float).copy()
    u = _restore(g, u, h2, opts.constraint_tol)

    if opts.semi_implicit:
        lu = spla.splu((sp.identity(op.n, format="csc") - opts.tau * op.matrix).tocsc())
        precond = lu.solve
        alpha0 = 1.0
    else:
        precond = lambda r: r  # noqa: E731
        alpha0 = h2 / 4.0

    E = energy(op, u)
    history = [E]
    alpha = alpha0
    steps = 0
    mu = multiplier(op, g, u)
    res = float(np.abs(el_residual(op, g, u, mu)).max())
    while steps < opts.max_steps and res > max(opts.tol, opts.newton_switch):
        steps += 1
        gp = g.derivative(u)
        if not np.any(gp > 0):
            raise DegenerateConstraint("g'(u) vanished during descent")
        zF = precond(op.matrix @ u + 1.0)
        zG = precond(gp)
        m = -float(gp @ zF) / float(gp @ zG)
        d = zF + m * zG
        while True:
            trial = _restore(g, u + alpha * d, h2, opts.constraint_tol)
            Et = energy(op, trial)
            if Et <= E + 1e-12 * max(1.0, abs(E)):
                break
            alpha *= 0.5
            if alpha < 1e-12 * alpha0:
                raise SolverError("line search stalled", res)
        u, E = trial, Et
        history.append(E)
        alpha = min(alpha0, 2.0 * alpha)
        mu = multiplier(op, g, u)
        res = float(np.abs(el_residual(op, g, u, mu)).max())
        if steps % 200 == 0:
            log.debug("varmin step %d: E=%.10g res=%.3e mu=%.4g max=%.4f", steps, E, res, mu, u.max())

    if res > max(opts.tol, opts.newton_switch):
        raise SolverError(f"descent stalled after {steps} steps (energy {E:.10g}, multiplier {mu:.6g})", res)
    newton = 0
    if res > opts.tol:
        u, mu, newton = _newton_polish(op, g, u, mu, opts.tol, opts.max_newton)
        E = energy(op, u)
    res = float(np.abs(el_residual(op, g, u, mu)).max())
    mu_ls = multiplier(op, g, u)
    cres = abs(_mass(g, u, h2) - 1.0)
    return VariationalResult(ScalarField(domain, u), mu_ls, E, cres, res, steps, newton,
                             t_a, tuple(history))


@dataclass(frozen=True)
class BoundsReport:
    checks: dict
    details: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def verify_solution_bounds(res: VariationalResult, v: ScalarField, g: Optional[CutoffFunction] = None,
                           sym_tol: float = 1e-6) -> BoundsReport:
    """Pass/fail report of the pointwise properties of the minimiser."""
    from .quasiconcavity import symmetry_monotonicity_check

    u = res.u
    d = u.domain
    x, y = d.interior_coords()
    barrier = 0.5 * (1 - y**2) + 2.0
    checks, details = {}, {}
    checks["mu_positive"] = res.mu > 0
    details["mu"] = res.mu
    gap = u.values - v.values
    checks["v_below_u"] = bool(np.all(gap > 0))
    details["min_u_minus_v"] = float(gap.min())
    over = u.values - barrier
    checks["below_barrier"] = bool(np.all(over < 0))
    details["max_u_minus_barrier"] = float(over.max())
    if not checks["below_barrier"]:
        details["barrier_violation_node"] = int(np.argmax(over))
    checks["max_above_one"] = u.max() > 1.0
    details["max_u"] = u.max()
    checks["positive"] = u.min() > 0
    if g is not None:
        c = abs(_mass(g, u.values, d.h ** 2) - 1.0)
        checks["constraint"] = c <= 1e-6
        details["constraint_residual"] = c
    sm = symmetry_monotonicity_check(u, tol=sym_tol)
    checks["symmetric"] = sm.asymmetry <= sym_tol
    checks["monotone"] = sm.monotonicity_violation <= sym_tol
    details["asymmetry"] = sm.asymmetry
    details["monotonicity_violation"] = sm.monotonicity_violation
    return BoundsReport(checks, details)
