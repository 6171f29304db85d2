"""Finite-difference elliptic kernel on cut-cell grid domains.

The operator ``L u = div(A grad u) + b . grad u (+ zeta u)`` is discretised
with unequal-arm (Shortley-Weller) differences at nodes next to a curved
boundary.  Dirichlet data are constant per boundary component, so an
operator is a sparse matrix over interior nodes plus one coupling vector per
component:

    (L u)_i = (A u)_i + sum_c coupling[c]_i * bc[c]
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import ARMS, INNER, INTERIOR, OUTER, E, N, S, W, GridDomain

log = logging.getLogger(__name__)

Coef = Union[float, Callable]


class SolverError(RuntimeError):
    """A solve did not reach its tolerance."""

    def __init__(self, msg, residual=None):
        super().__init__(msg if residual is None else f"{msg} (achieved residual {residual:.3e})")
        self.residual = residual


class BracketError(RuntimeError):
    """Monotone iteration left its sub/supersolution bracket."""

    def __init__(self, msg, node=None):
        super().__init__(msg)
        self.node = node


class EllipticityError(ValueError):
    pass


# --------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values on the interior of a grid domain.

    ``bc`` maps each boundary component (OUTER, INNER) to its constant
    Dirichlet value; off the interior the field is extended by those values.
    """

    domain: GridDomain
    values: np.ndarray
    bc: dict = field(default_factory=lambda: {OUTER: 0.0, INNER: 0.0})

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.domain.n_interior,):
            raise ValueError(f"expected {self.domain.n_interior} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite values")
        bc = {OUTER: 0.0, INNER: 0.0}
        bc.update({int(k): float(val) for k, val in self.bc.items()})
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "bc", bc)

    def with_values(self, values, bc=None) -> "ScalarField":
        return ScalarField(self.domain, values, self.bc if bc is None else bc)

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())

    def grid(self, ghost: bool = False) -> np.ndarray:
        """Values on the full grid.

        Exterior nodes get their component's boundary value.  With
        ``ghost=True`` exterior nodes next to the interior instead get the
        linear extrapolation through the true boundary crossing, so that
        bilinear interpolation and contouring see the boundary where it is.
        """
        d = self.domain
        out = np.zeros((d.nx, d.ny))
        out[d.region == OUTER] = self.bc[OUTER]
        out[d.region == INNER] = self.bc[INNER]
        out[d.interior_mask] = self.values
        if not ghost:
            return out
        acc = np.zeros_like(out)
        cnt = np.zeros_like(out)
        I, J = d.interior_ij()
        arms = d.arms[:, I, J]
        labels = d.arm_label[:, I, J]
        for k, (di, dj) in enumerate(ARMS):
            cut = labels[k] != INTERIOR
            if not np.any(cut):
                continue
            bval = np.where(labels[k][cut] == INNER, self.bc[INNER], self.bc[OUTER])
            up = self.values[cut]
            g = bval + (up - bval) * (1.0 - 1.0 / arms[k][cut])
            np.add.at(acc, (I[cut] + di, J[cut] + dj), g)
            np.add.at(cnt, (I[cut] + di, J[cut] + dj), 1.0)
        hit = cnt > 0
        out[hit] = acc[hit] / cnt[hit]
        return out

    def evaluate(self, points) -> np.ndarray:
        """Bilinear evaluation at arbitrary points.

        Points outside the outer boundary or inside the hole get the boundary
        value of that component.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = self.domain
        U = self.grid(ghost=True)
        fx = (pts[:, 0] - d.origin[0]) / d.h
        fy = (pts[:, 1] - d.origin[1]) / d.h
        i = np.clip(np.floor(fx).astype(int), 0, d.nx - 2)
        j = np.clip(np.floor(fy).astype(int), 0, d.ny - 2)
        tx = np.clip(fx - i, 0.0, 1.0)
        ty = np.clip(fy - j, 0.0, 1.0)
        val = (U[i, j] * (1 - tx) * (1 - ty) + U[i + 1, j] * tx * (1 - ty)
               + U[i, j + 1] * (1 - tx) * ty + U[i + 1, j + 1] * tx * ty)
        reg = d.region_of(pts[:, 0], pts[:, 1])
        val = np.where(reg == OUTER, self.bc[OUTER], val)
        val = np.where(reg == INNER, self.bc[INNER], val)
        return val


def restrict(field_: ScalarField, target: GridDomain, bc=None) -> ScalarField:
    """Restrict a field to a domain on the same grid with fewer interior nodes."""
    src = field_.domain
    if (src.nx, src.ny, src.h, src.origin) != (target.nx, target.ny, target.h, target.origin):
        raise ValueError("restriction needs a shared grid")
    full = field_.grid()
    return ScalarField(target, full[target.interior_mask], field_.bc if bc is None else bc)


# --------------------------------------------------------------------------
# coefficients


def _eval(c: Coef, x, y):
    if callable(c):
        return np.broadcast_to(np.asarray(c(x, y), dtype=float), np.shape(x)).astype(float)
    return np.full(np.shape(x), float(c))


@dataclass(frozen=True)
class CoefficientField:
    """Symmetric diffusion matrix ``[[a11, a12], [a12, a22]]`` and drift ``b``.

    Entries are constants or vectorised callables ``c(x, y)``.
    """

    a11: Coef = 1.0
    a22: Coef = 1.0
    a12: Coef = 0.0
    b1: Coef = 0.0
    b2: Coef = 0.0
    beta: Optional[float] = None

    @classmethod
    def laplacian(cls, scale: float = 1.0) -> "CoefficientField":
        return cls(a11=scale, a22=scale)

    @property
    def is_laplacian_like(self) -> bool:
        consts = [not callable(c) for c in (self.a11, self.a22, self.a12, self.b1, self.b2)]
        return (all(consts) and float(self.a12) == 0.0 and float(self.b1) == 0.0
                and float(self.b2) == 0.0 and float(self.a11) == float(self.a22))

    @property
    def has_drift(self) -> bool:
        return callable(self.b1) or callable(self.b2) or float(self.b1) != 0.0 or float(self.b2) != 0.0

    @property
    def has_cross(self) -> bool:
        return callable(self.a12) or float(self.a12) != 0.0

    def min_eigenvalue(self, x, y):
        a11, a22, a12 = _eval(self.a11, x, y), _eval(self.a22, x, y), _eval(self.a12, x, y)
        return 0.5 * (a11 + a22) - np.sqrt(0.25 * (a11 - a22) ** 2 + a12**2)

    def ellipticity(self, domain: GridDomain) -> float:
        """Smallest eigenvalue of A over all nodes and arm midpoints."""
        X, Y = domain.grid_coords()
        h = domain.h
        samples = [self.min_eigenvalue(X, Y)]
        for dx, dy in ARMS:
            samples.append(self.min_eigenvalue(X + 0.5 * dx * h, Y + 0.5 * dy * h))
        found = float(min(s.min() for s in samples))
        return found


# --------------------------------------------------------------------------
# operator


@dataclass(eq=False)
class DiscreteOperator:
    domain: GridDomain
    matrix: sp.csr_matrix
    coupling: dict
    symmetric: bool  # b = 0 and A a constant multiple of I
    matrix_symmetric: bool = False  # unequal-arm rows break this near curved boundaries
    _lu: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def boundary_term(self, bc: dict) -> np.ndarray:
        out = np.zeros(self.n)
        for comp, vec in self.coupling.items():
            val = float(bc.get(comp, 0.0))
            if val != 0.0:
                out += val * vec
        return out

    def apply(self, u, bc=None) -> np.ndarray:
        """``L u`` at interior nodes, with boundary data ``bc`` (default: u's)."""
        if isinstance(u, ScalarField):
            bc = u.bc if bc is None else bc
            u = u.values
        bc = {} if bc is None else bc
        return self.matrix @ u + self.boundary_term(bc)

    def row_scale(self) -> np.ndarray:
        """Per-row normalisation: 1 at regular nodes, larger where a short arm
        inflates the stencil.  Used to report residuals free of the 1/theta
        blow-up of unequal-arm rows."""
        h2 = self.domain.h**2
        return np.maximum(1.0, np.abs(self.matrix.diagonal()) * h2 / 4.0)

    def factor(self, shift: float = 0.0):
        """Sparse LU of ``A - shift*I``, cached per shift."""
        key = float(shift)
        if key not in self._lu:
            M = (self.matrix - shift * sp.identity(self.n, format="csr")).tocsc()
            self._lu[key] = spla.splu(M)
        return self._lu[key]

    def stencil(self, i: int, j: int) -> dict:
        """Coefficients of row (i, j) keyed by grid offset; for inspection."""
        d = self.domain
        k = d.index[i, j]
        row = self.matrix.getrow(k)
        I, J = d.interior_ij()
        return {(int(I[c] - i), int(J[c] - j)): float(v) for c, v in zip(row.indices, row.data)}


def assemble_operator(domain: GridDomain, coeffs: CoefficientField,
                      zeroth: Optional[np.ndarray] = None) -> DiscreteOperator:
    """Assemble ``div(A grad) + b.grad (+ diag(zeroth))`` on ``domain``.

    Drift uses centred differences where the mesh Peclet number
    ``|b_i| h / (2 beta)`` is below 1 and first-order upwinding elsewhere;
    both keep the off-diagonal entries nonnegative.
    """
    beta = coeffs.ellipticity(domain)
    if coeffs.beta is not None and beta < coeffs.beta * (1 - 1e-12):
        raise EllipticityError(f"ellipticity {beta:.3g} below declared floor {coeffs.beta:.3g}")
    if beta <= 0:
        raise EllipticityError(f"A is not uniformly elliptic (min eigenvalue {beta:.3g})")
    beta = coeffs.beta if coeffs.beta is not None else beta

    d = domain
    h = d.h
    n = d.n_interior
    I, J = d.interior_ij()
    x = d.origin[0] + I * h
    y = d.origin[1] + J * h
    arms = d.arms[:, I, J] * h
    labels = d.arm_label[:, I, J]
    idx = d.index

    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    coupling = {OUTER: np.zeros(n), INNER: np.zeros(n)}
    rid = np.arange(n)

    def put(k, coef):
        """Add coefficient ``coef`` for the neighbour along arm ``k``."""
        lab = labels[k]
        inner = lab == INTERIOR
        di, dj = ARMS[k]
        rows.append(rid[inner])
        cols.append(idx[I[inner] + di, J[inner] + dj])
        vals.append(coef[inner])
        for comp in (OUTER, INNER):
            m = lab == comp
            coupling[comp][m] += coef[m]

    for axis, (kp, km, acoef, bcoef) in enumerate(((E, W, coeffs.a11, coeffs.b1),
                                                    (N, S, coeffs.a22, coeffs.b2))):
        hp, hm = arms[kp], arms[km]
        ex, ey = (1.0, 0.0) if axis == 0 else (0.0, 1.0)
        a_p = _eval(acoef, x + 0.5 * hp * ex, y + 0.5 * hp * ey)
        a_m = _eval(acoef, x - 0.5 * hm * ex, y - 0.5 * hm * ey)
        cp = 2.0 * a_p / (hp * (hp + hm))
        cm = 2.0 * a_m / (hm * (hp + hm))
        b = _eval(bcoef, x, y)
        centred = np.abs(b) * h / (2.0 * beta) < 1.0
        # centred unequal-arm first derivative
        dp_c = b * hm / (hp * (hp + hm))
        dm_c = -b * hp / (hm * (hp + hm))
        d0_c = b * (hp - hm) / (hp * hm)
        # one-sided, towards the side that keeps the neighbour coefficient >= 0
        pos = b > 0
        dp_u = np.where(pos, b / hp, 0.0)
        dm_u = np.where(pos, 0.0, -b / hm)
        d0_u = np.where(pos, -b / hp, b / hm)
        dp = np.where(centred, dp_c, dp_u)
        dm = np.where(centred, dm_c, dm_u)
        d0 = np.where(centred, d0_c, d0_u)
        put(kp, cp + dp)
        put(km, cm + dm)
        diag += -(cp + cm) + d0

    if coeffs.has_cross:
        a12 = _eval(coeffs.a12, x, y)
        active = a12 != 0.0
        full = np.all(labels == INTERIOR, axis=0)
        diag_ok = np.ones(n, dtype=bool)
        for di, dj in ((1, 1), (-1, 1), (1, -1), (-1, -1)):
            diag_ok &= d.region[I + di, J + dj] == INTERIOR
        bad = active & ~(full & diag_ok)
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise ValueError(
                "off-diagonal diffusion is unsupported at cut cells "
                f"(node {int(I[k])},{int(J[k])} at ({x[k]:.4g},{y[k]:.4g}))"
            )
        aE, aW = _eval(coeffs.a12, x + h, y), _eval(coeffs.a12, x - h, y)
        aN, aS = _eval(coeffs.a12, x, y + h), _eval(coeffs.a12, x, y - h)
        corner = {(1, 1): aE + aN, (-1, 1): -(aW + aN), (1, -1): -(aE + aS), (-1, -1): aW + aS}
        for (di, dj), c in corner.items():
            m = active
            rows.append(rid[m])
            cols.append(idx[I[m] + di, J[m] + dj])
            vals.append(c[m] / (4.0 * h * h))

    if zeroth is not None:
        diag = diag + np.broadcast_to(np.asarray(zeroth, dtype=float), (n,))

    rows.append(rid)
    cols.append(rid)
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    A.sum_duplicates()
    matrix_symmetric = bool(abs(A - A.T).max() <= 1e-12 * abs(A).max())
    return DiscreteOperator(domain, A, coupling, coeffs.is_laplacian_like, matrix_symmetric)


# --------------------------------------------------------------------------
# linear solves


@dataclass(frozen=True)
class LinearOptions:
    tol: float = 1e-10
    max_iter: int = 20000
    method: str = "direct"  # or "krylov"


def _jacobi(A):
    dinv = 1.0 / A.diagonal()
    return spla.LinearOperator(A.shape, matvec=lambda r: dinv * r)


def solve_matrix(op: DiscreteOperator, rhs: np.ndarray, shift: float = 0.0,
                 opts: LinearOptions = LinearOptions()) -> np.ndarray:
    """Solve ``(A - shift I) u = rhs`` and check the relative residual."""
    M = op.matrix if shift == 0.0 else op.matrix - shift * sp.identity(op.n, format="csr")
    scale = max(np.abs(rhs).max(), np.finfo(float).tiny)
    if opts.method == "direct":
        u = op.factor(shift).solve(rhs)
    elif opts.method == "krylov":
        kw = dict(rtol=opts.tol * 1e-2, atol=0.0, maxiter=opts.max_iter, M=_jacobi(M))
        if op.symmetric and op.matrix_symmetric:
            u, info = spla.cg(M, rhs, **kw)
        else:
            u, info = spla.bicgstab(M, rhs, **kw)
    else:
        raise ValueError(f"unknown linear method {opts.method!r}")
    res = np.abs(M @ u - rhs).max() / scale
    if not res <= opts.tol:
        raise SolverError(f"linear solve ({opts.method}) missed tolerance {opts.tol:g}", res)
    return u


def solve_linear_system(op: DiscreteOperator, rhs, bc=None,
                        opts: LinearOptions = LinearOptions()) -> ScalarField:
    """Solve ``L u = rhs`` with Dirichlet data ``bc`` (constant per component)."""
    bc = {OUTER: 0.0, INNER: 0.0} if bc is None else bc
    r = rhs.values if isinstance(rhs, ScalarField) else np.broadcast_to(np.asarray(rhs, float), (op.n,))
    b = r - op.boundary_term(bc)
    if not np.any(b):
        return ScalarField(op.domain, np.zeros(op.n), bc)
    return ScalarField(op.domain, solve_matrix(op, b, opts=opts), bc)


def solve_torsion(domain: GridDomain, coeffs: Optional[CoefficientField] = None,
                  op: Optional[DiscreteOperator] = None,
                  opts: LinearOptions = LinearOptions()) -> ScalarField:
    """Solve ``L v = -1`` with zero boundary data."""
    op = assemble_operator(domain, coeffs or CoefficientField.laplacian()) if op is None else op
    return solve_linear_system(op, -1.0, {OUTER: 0.0, INNER: 0.0}, opts)


# --------------------------------------------------------------------------
# eigenpair


@dataclass(frozen=True)
class EigenPair:
    lambda1: float
    phi: ScalarField
    residual: float
    iterations: int


def principal_eigenpair(domain: GridDomain, coeffs: Optional[CoefficientField] = None,
                        zeta=None, tol: float = 1e-8, max_iter: int = 500) -> EigenPair:
    """Principal Dirichlet eigenpair of ``-(div(A grad) + b.grad + zeta)``.

    Shifted inverse power iteration.  The shift sits below ``-max zeta`` so
    that the shifted matrix is an M-matrix: its inverse is positive and the
    iterates stay positive.
    """
    if domain.has_inner():
        raise ValueError("principal eigenpair is computed on a single-component domain")
    coeffs = coeffs or CoefficientField.laplacian()
    z = np.zeros(domain.n_interior) if zeta is None else np.broadcast_to(
        np.asarray(zeta, dtype=float), (domain.n_interior,))
    op = assemble_operator(domain, coeffs, zeroth=z)
    B = -op.matrix
    sigma = -float(z.max()) - 1.0
    lu = op.factor(-sigma)  # A + sigma I = -(B - sigma I)
    phi = np.ones(op.n)
    lam = np.nan
    res = np.inf
    for it in range(1, max_iter + 1):
        w = -lu.solve(phi)
        w /= w.max()
        Bw = B @ w
        lam = float(w @ Bw / (w @ w))
        res = float(np.abs(Bw - lam * w).max())
        phi = w
        if res <= tol:
            break
    else:
        raise SolverError(f"inverse iteration stagnated after {max_iter} steps", res)
    if phi.min() <= 0:
        raise SolverError("principal eigenvector lost positivity", res)
    return EigenPair(lam, ScalarField(domain, phi), res, it)


# --------------------------------------------------------------------------
# semilinear problems


@dataclass(frozen=True)
class NonlinearitySpec:
    """``f(x, y, s)`` with the bounds the monotone method needs.

    ``sup`` is an upper bound C of f; ``zero_at_zero`` flags f(., 0) = 0,
    in which case ``zeta(x, y)`` is the limit of f/s at 0+; ``mu`` (optional)
    is a level beyond which f <= 0.
    """

    f: Callable
    sup: float
    zero_at_zero: bool
    zeta: Optional[Callable] = None
    mu: Optional[float] = None
    name: str = "f"

    def __call__(self, x, y, s):
        return np.broadcast_to(np.asarray(self.f(x, y, s), dtype=float), np.shape(s))

    def ratio_nonincreasing(self, x, y, s_grid=None, tol=1e-12) -> bool:
        """Sampled check that s -> f(x, s)/s is nonincreasing at the given points."""
        s_grid = np.logspace(-6, 3, 400) if s_grid is None else s_grid
        X = np.asarray(x, float)[:, None]
        Y = np.asarray(y, float)[:, None]
        ratio = self(X, Y, s_grid[None, :]) / s_grid[None, :]
        jumps = np.diff(ratio, axis=1)
        return bool(np.all(jumps <= tol * np.maximum(1.0, np.abs(ratio[:, 1:]))))


def constant_nonlinearity(beta: float) -> NonlinearitySpec:
    if beta <= 0:
        raise ValueError("constant nonlinearity must be positive")
    return NonlinearitySpec(lambda x, y, s: np.full(np.shape(s), float(beta)), sup=float(beta),
                            zero_at_zero=False, name=f"constant {beta:g}")


def logistic_nonlinearity(gamma: float, p: float = 2.0) -> NonlinearitySpec:
    """``f(s) = gamma s - s^p`` with ``p > 1``."""
    if p <= 1 or gamma <= 0:
        raise ValueError("need gamma > 0 and p > 1")
    s_star = (gamma / p) ** (1.0 / (p - 1.0))
    sup = gamma * s_star - s_star**p
    mu = gamma ** (1.0 / (p - 1.0))

    def f(x, y, s):
        s = np.asarray(s, dtype=float)
        return gamma * s - np.abs(s) ** p * np.sign(s)

    return NonlinearitySpec(f, sup=sup, zero_at_zero=True,
                            zeta=lambda x, y: np.full(np.shape(x), float(gamma)),
                            mu=mu, name=f"logistic gamma={gamma:g} p={p:g}")


def lipschitz_bound(f: NonlinearitySpec, x, y, lo: float, hi: float, n: int = 1000,
                    max_points: int = 200) -> float:
    """Sampled Lipschitz constant of ``s -> f(x, s)`` on [lo, hi], inflated 1.5x."""
    if hi <= lo:
        hi = lo + 1.0
    stride = max(1, len(x) // max_points)
    X = np.asarray(x)[::stride, None]
    Y = np.asarray(y)[::stride, None]
    s = np.linspace(lo, hi, n)[None, :]
    vals = f(X, Y, s)
    slope = np.abs(np.diff(vals, axis=1)).max() / (s[0, 1] - s[0, 0])
    return 1.5 * float(slope)


@dataclass(frozen=True)
class MonotoneResult:
    u: ScalarField
    sweeps: int
    residual: float
    K: float
    direction: str


@dataclass(frozen=True)
class NonlinearOptions:
    tol: float = 1e-8
    max_sweeps: int = 20000
    tol_feas: float = 1e-6


def nonlinear_residual(op: DiscreteOperator, f: NonlinearitySpec, u: np.ndarray, bc: dict,
                       xy=None) -> np.ndarray:
    """Row-normalised ``L u + f(x, u)``."""
    x, y = op.domain.interior_coords() if xy is None else xy
    return (op.apply(u, bc) + f(x, y, u)) / op.row_scale()


def monotone_semilinear_solve(domain: GridDomain, coeffs: CoefficientField, f: NonlinearitySpec,
                              sub: ScalarField, sup: ScalarField, bc: Optional[dict] = None,
                              opts: NonlinearOptions = NonlinearOptions(),
                              start: str = "super", op: Optional[DiscreteOperator] = None,
                              K: Optional[float] = None,
                              on_sweep: Optional[Callable] = None) -> MonotoneResult:
    """Solve ``L u + f(x, u) = 0`` by monotone iteration inside [sub, sup].

    Each sweep solves ``(L - K) u_{k+1} = -f(u_k) - K u_k`` with K a
    Lipschitz bound of f over the bracket.  The iteration starts from
    ``sup`` (downward) or ``sub`` (upward); ordering against the bracket and
    the previous iterate is asserted at every sweep.
    """
    bc = {OUTER: 0.0, INNER: 0.0} if bc is None else {OUTER: 0.0, INNER: 0.0, **bc}
    op = assemble_operator(domain, coeffs) if op is None else op
    x, y = domain.interior_coords()
    lo_v, hi_v = sub.values, sup.values
    scale = max(1.0, float(np.abs(hi_v).max()), max(abs(v) for v in bc.values()))
    slack = opts.tol_feas * scale

    if np.any(lo_v > hi_v + slack):
        k = int(np.argmax(lo_v - hi_v))
        raise BracketError("subsolution exceeds supersolution", node=k)
    r_sub = nonlinear_residual(op, f, lo_v, bc, (x, y))
    r_sup = nonlinear_residual(op, f, hi_v, bc, (x, y))
    if r_sub.min() < -opts.tol_feas * scale:
        k = int(np.argmin(r_sub))
        raise BracketError(f"not a subsolution: L sub + f(sub) = {r_sub[k]:.3e} at node {k}", node=k)
    if r_sup.max() > opts.tol_feas * scale:
        k = int(np.argmax(r_sup))
        raise BracketError(f"not a supersolution: L sup + f(sup) = {r_sup[k]:.3e} at node {k}", node=k)

    if K is None:
        top = max(hi_v.max(), max(bc.values()))
        K = lipschitz_bound(f, x, y, min(lo_v.min(), 0.0), top)
    K = max(K, 1e-12)
    bterm = op.boundary_term(bc)
    lu = op.factor(K)

    u = (hi_v if start == "super" else lo_v).copy()
    sign = -1.0 if start == "super" else 1.0
    res = np.inf
    for sweep in range(1, opts.max_sweeps + 1):
        new = lu.solve(-f(x, y, u) - K * u - bterm)
        if np.any(new < lo_v - slack) or np.any(new > hi_v + slack):
            k = int(np.argmax(np.maximum(lo_v - new, new - hi_v)))
            raise BracketError(f"iterate {sweep} left the bracket at node {k}", node=k)
        if np.any(sign * (new - u) < -slack):
            k = int(np.argmax(-sign * (new - u)))
            raise BracketError(f"iterate {sweep} is not monotone at node {k}", node=k)
        u = new
        if on_sweep is not None:
            on_sweep(sweep, u)
        res = float(np.abs(nonlinear_residual(op, f, u, bc, (x, y))).max())
        if res <= opts.tol:
            break
    else:
        raise SolverError(f"monotone iteration did not converge in {opts.max_sweeps} sweeps", res)
    log.debug("monotone %s: %d sweeps, residual %.2e, K=%.3g", start, sweep, res, K)
    return MonotoneResult(ScalarField(domain, u, bc), sweep, res, K, start)
