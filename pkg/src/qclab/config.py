"""Experiment configuration: INI file with one section per module.

Example::

    [experiment]
    pipeline = stadium
    out = runs/stadium

    [domain]
    shape = stadium
    a = 12
    h = 1/32

    [varmin]
    tol = 1e-8

    [levels]
    range = 0.3:0.5:40
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

STADIUM, RING, SWEEP = "stadium", "ring", "sweep"
PIPELINES = (STADIUM, RING, SWEEP)


class ConfigError(ValueError):
    pass


def parse_number(text) -> float:
    """Float, also accepting fractions such as ``1/32``."""
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"not a number: {text!r}") from exc


def parse_list(text) -> tuple:
    return tuple(parse_number(t) for t in str(text).replace(",", " ").split())


def parse_levels(text) -> tuple:
    """``"a:b:n"`` -> (a, b, n)."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"levels must look like 'a:b:n', got {text!r}")
    lo, hi = parse_number(parts[0]), parse_number(parts[1])
    n = int(parts[2])
    if not lo < hi or n < 2:
        raise ConfigError(f"bad level range {text!r}")
    return lo, hi, n


@dataclass(frozen=True)
class DomainConfig:
    shape: str = "stadium"
    a: float = 8.0
    cap: str = "circle"
    R: float = 1.0
    h: float = 1 / 32


@dataclass(frozen=True)
class SolverConfig:
    linear_tol: float = 1e-10
    linear_max_iter: int = 20000
    linear_method: str = "direct"
    nonlinear_tol: float = 1e-8
    nonlinear_max_sweeps: int = 20000


@dataclass(frozen=True)
class VarminConfig:
    tol: float = 1e-8
    max_steps: int = 4000
    semi_implicit: bool = True


@dataclass(frozen=True)
class RingConfig:
    f: str = "logistic 10 2"
    coefficients: str = "laplacian"
    x0_strategy: str = "walk"
    ratio: float = 0.5
    eps: tuple = (0.2, 0.1, 0.05, 0.025)
    M: Optional[float] = None  # None means M0
    r0: float = 0.3
    hole: str = "disk"
    gap_tol: float = 0.02


@dataclass(frozen=True)
class SweepConfig:
    kind: str = "a"
    a_values: tuple = (4.0, 6.0, 8.0, 10.0, 12.0)
    workers: int = 1


@dataclass(frozen=True)
class OutputConfig:
    fields: bool = True
    contours: bool = True
    report: bool = True
    figures: bool = True


@dataclass(frozen=True)
class ExperimentConfig:
    pipeline: str = STADIUM
    out: str = "runs/out"
    domain: DomainConfig = field(default_factory=DomainConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    varmin: VarminConfig = field(default_factory=VarminConfig)
    cutoff: str = "smoothstep"
    levels: Optional[tuple] = None
    ring: RingConfig = field(default_factory=RingConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    deterministic: bool = True

    def validate(self) -> "ExperimentConfig":
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"pipeline must be one of {PIPELINES}, got {self.pipeline!r}")
        d = self.domain
        if d.h <= 0:
            raise ConfigError("domain.h must be positive")
        if d.shape == "stadium" and d.a < 1:
            raise ConfigError("domain.a must be at least 1")
        if d.shape not in ("stadium", "disk"):
            raise ConfigError(f"unknown domain.shape {d.shape!r}")
        if self.cutoff not in ("smoothstep", "oscillatory"):
            raise ConfigError(f"unknown cutoff.variant {self.cutoff!r}")
        if not 0 < self.ring.ratio < 1:
            raise ConfigError("ring.ratio must lie in (0, 1)")
        if any(e <= 0 for e in self.ring.eps):
            raise ConfigError("ring.eps values must be positive")
        if self.sweep.kind not in ("a", "eps"):
            raise ConfigError("sweep.kind must be 'a' or 'eps'")
        if self.sweep.workers < 1:
            raise ConfigError("sweep.workers must be at least 1")
        return self


_BOOL = {"true": True, "yes": True, "1": True, "on": True,
         "false": False, "no": False, "0": False, "off": False}


def _bool(text) -> bool:
    try:
        return _BOOL[str(text).strip().lower()]
    except KeyError as exc:
        raise ConfigError(f"not a boolean: {text!r}") from exc


def load_config(path) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    if not cp.read(Path(path)):
        raise ConfigError(f"cannot read config {path}")
    return config_from_parser(cp)


def config_from_string(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    return config_from_parser(cp)


def config_from_parser(cp: configparser.ConfigParser) -> ExperimentConfig:
    known = {"experiment", "domain", "linear", "nonlinear", "varmin", "cutoff", "levels",
             "ring", "sweep", "output"}
    extra = set(cp.sections()) - known
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")

    def get(sec, key, conv, default):
        if cp.has_option(sec, key):
            return conv(cp.get(sec, key))
        return default

    cfg = ExperimentConfig()
    dom = DomainConfig(
        shape=get("domain", "shape", str.strip, cfg.domain.shape),
        a=get("domain", "a", parse_number, cfg.domain.a),
        cap=get("domain", "cap", str.strip, cfg.domain.cap),
        R=get("domain", "R", parse_number, cfg.domain.R),
        h=get("domain", "h", parse_number, cfg.domain.h),
    )
    solver = SolverConfig(
        linear_tol=get("linear", "tol", parse_number, cfg.solver.linear_tol),
        linear_max_iter=get("linear", "max_iter", int, cfg.solver.linear_max_iter),
        linear_method=get("linear", "method", str.strip, cfg.solver.linear_method),
        nonlinear_tol=get("nonlinear", "tol", parse_number, cfg.solver.nonlinear_tol),
        nonlinear_max_sweeps=get("nonlinear", "max_sweeps", int, cfg.solver.nonlinear_max_sweeps),
    )
    varmin = VarminConfig(
        tol=get("varmin", "tol", parse_number, cfg.varmin.tol),
        max_steps=get("varmin", "max_steps", int, cfg.varmin.max_steps),
        semi_implicit=get("varmin", "semi_implicit", _bool, cfg.varmin.semi_implicit),
    )

    def parse_M(text):
        text = text.strip().lower()
        return None if text == "auto" else parse_number(text)

    ring = RingConfig(
        f=get("ring", "f", str.strip, cfg.ring.f),
        coefficients=get("ring", "coefficients", str.strip, cfg.ring.coefficients),
        x0_strategy=get("ring", "x0_strategy", str.strip, cfg.ring.x0_strategy),
        ratio=get("ring", "ratio", parse_number, cfg.ring.ratio),
        eps=get("ring", "eps", parse_list, cfg.ring.eps),
        M=get("ring", "M", parse_M, cfg.ring.M),
        r0=get("ring", "r0", parse_number, cfg.ring.r0),
        hole=get("ring", "hole", str.strip, cfg.ring.hole),
        gap_tol=get("ring", "gap_tol", parse_number, cfg.ring.gap_tol),
    )
    sweep = SweepConfig(
        kind=get("sweep", "kind", str.strip, cfg.sweep.kind),
        a_values=get("sweep", "a", parse_list, cfg.sweep.a_values),
        workers=get("sweep", "workers", int, cfg.sweep.workers),
    )
    output = OutputConfig(**{k: get("output", k, _bool, getattr(cfg.output, k))
                             for k in ("fields", "contours", "report", "figures")})
    return ExperimentConfig(
        pipeline=get("experiment", "pipeline", str.strip, cfg.pipeline),
        out=get("experiment", "out", str.strip, cfg.out),
        domain=dom, solver=solver, varmin=varmin,
        cutoff=get("cutoff", "variant", str.strip, cfg.cutoff),
        levels=get("levels", "range", parse_levels, None),
        ring=ring, sweep=sweep, output=output,
    ).validate()


def override(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None}).validate()
