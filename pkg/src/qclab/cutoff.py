"""Constraint profiles ``g``: zero below 1, one above 2, nondecreasing.

Two variants are provided.  ``smoothstep`` uses the quintic step on [1, 2]
and is C^2.  ``oscillatory`` integrates the bump

    theta(s) = exp(-1/(s-1) - 1/(2-s)) * (sin(1/(s-1)^2) + 1)

and is C^infinity, with a second derivative that changes sign infinitely
often as s -> 1+.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import BPoly

SMOOTHSTEP = "smoothstep"
OSCILLATORY = "oscillatory"


def theta(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = (s > 1.0) & (s < 2.0)
    t = s[m] - 1.0
    with np.errstate(over="ignore", under="ignore"):
        out[m] = np.exp(-1.0 / t - 1.0 / (1.0 - t)) * (np.sin(1.0 / t**2) + 1.0)
    return out


def theta_prime(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    m = (s > 1.0) & (s < 2.0)
    t = s[m] - 1.0
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        env = np.exp(-1.0 / t - 1.0 / (1.0 - t))
        d_env = 1.0 / t**2 - 1.0 / (1.0 - t) ** 2
        osc = np.sin(1.0 / t**2) + 1.0
        d_osc = -2.0 * np.cos(1.0 / t**2) / t**3
        val = env * (d_env * osc + d_osc)
    out[m] = np.where(env > 0.0, val, 0.0)
    return out


def _theta_integral(lo, hi):
    val, _ = integrate.quad(theta, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=500)
    return val


def _graded_knots(start=1.02, h_max=2e-3):
    # spacing follows the local wavelength ~ (s-1)^3 of sin(1/(s-1)^2)
    knots = [start]
    while knots[-1] < 2.0:
        t = knots[-1] - 1.0
        knots.append(min(2.0, knots[-1] + min(h_max, 0.2 * t**3)))
    return np.array(knots)


@lru_cache(maxsize=None)
def _oscillatory_table():
    # Below s = 1.02 the envelope is under e^-49: the table is exactly zero there.
    knots = np.concatenate([[1.0], _graded_knots()])
    x, w = np.polynomial.legendre.leggauss(12)
    a, b = knots[:-1, None], knots[1:, None]
    nodes = 0.5 * (b - a) * x + 0.5 * (b + a)
    pieces = (0.5 * (b - a) * w * theta(nodes)).sum(axis=1)
    cumulative = np.concatenate([[0.0], np.cumsum(pieces)])
    kappa = 1.0 / _theta_integral(1.0, 2.0)
    # quintic Hermite pieces: value, slope and curvature match at every knot
    ders = np.column_stack([kappa * cumulative, kappa * theta(knots), kappa * theta_prime(knots)])
    spline = BPoly.from_derivatives(knots, ders)
    return kappa, spline


@dataclass(frozen=True)
class CutoffFunction:
    variant: str = SMOOTHSTEP
    kappa: float = 1.0
    _spline: object = field(default=None, repr=False, compare=False)

    def value(self, s):
        s = np.asarray(s, dtype=float)
        if self.variant == SMOOTHSTEP:
            t = np.clip(s - 1.0, 0.0, 1.0)
            return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)
        out = np.where(s >= 2.0, 1.0, 0.0)
        m = (s > 1.0) & (s < 2.0)
        out[m] = np.clip(self._spline(s[m]), 0.0, 1.0)
        return out

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        if self.variant == SMOOTHSTEP:
            t = np.clip(s - 1.0, 0.0, 1.0)
            return 30.0 * t**2 * (1.0 - t) ** 2
        return self.kappa * theta(s)

    def second_derivative(self, s):
        s = np.asarray(s, dtype=float)
        if self.variant == SMOOTHSTEP:
            t = np.clip(s - 1.0, 0.0, 1.0)
            return 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
        return self.kappa * theta_prime(s)

    def __call__(self, s):
        return self.value(s)


def smoothstep_cutoff() -> CutoffFunction:
    return CutoffFunction(SMOOTHSTEP, 1.0)


def oscillatory_cutoff() -> CutoffFunction:
    kappa, spline = _oscillatory_table()
    return CutoffFunction(OSCILLATORY, kappa, spline)


def make_cutoff(variant: str) -> CutoffFunction:
    if variant == SMOOTHSTEP:
        return smoothstep_cutoff()
    if variant == OSCILLATORY:
        return oscillatory_cutoff()
    raise ValueError(f"unknown cutoff variant {variant!r}")


def eval_cutoff(g: CutoffFunction, s):
    """Return ``(g(s), g'(s))``."""
    return g.value(s), g.derivative(s)
