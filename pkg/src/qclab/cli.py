"""Pipelines for the stadium and ring counterexamples, and parameter sweeps.

    qclab --config configs/stadium.ini --out runs/stadium
    qclab --config configs/ring.ini --pipeline ring --levels 0.3:0.5:40

The exit code is 0 iff every check passes and, for the counterexample
pipelines, a non-convexity witness was found.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import outputs
from .config import RING, STADIUM, SWEEP, ConfigError, ExperimentConfig, load_config, override, parse_levels
from .cutoff import make_cutoff
from .elliptic import (CoefficientField, LinearOptions, NonlinearOptions, assemble_operator,
                       constant_nonlinearity, logistic_nonlinearity, solve_torsion)
from .geometry import build_disk_domain, build_stadium
from .quasiconcavity import (DEFAULT_TOL, level_grid, profile_deviation, scan_nonconvex_levels,
                             sqrt_concavity_check, superlevel_extent, three_point_test)
from .ringlab import (epsilon_convergence_study, ring_nonconvexity_witness, select_hole_center,
                      solve_base_problem)
from .varmin import VarminOptions, constrained_minimize, verify_solution_bounds

log = logging.getLogger("qclab")

DEFAULT_STADIUM_LEVELS = (0.3, 0.5, 40)


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunReport:
    pipeline: str
    metrics: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    manifest: list = field(default_factory=list)
    witness_found: bool = False
    needs_witness: bool = True
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return (self.error is None and all(self.checks.values())
                and (self.witness_found or not self.needs_witness))


@contextmanager
def stage(name: str):
    log.info("stage %s", name)
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
        raise PipelineError(name, exc) from exc


# --------------------------------------------------------------------------
# spec parsing helpers


def make_nonlinearity(spec: str):
    parts = spec.split()
    if parts[0] == "constant" and len(parts) == 2:
        return constant_nonlinearity(float(parts[1]))
    if parts[0] == "logistic" and len(parts) in (2, 3):
        return logistic_nonlinearity(float(parts[1]), float(parts[2]) if len(parts) == 3 else 2.0)
    raise ConfigError(f"unknown nonlinearity spec {spec!r}")


def make_coefficients(spec: str) -> CoefficientField:
    if spec == "laplacian":
        return CoefficientField.laplacian()
    if spec == "mild":
        # anisotropic, x-dependent diffusion with a constant drift
        return CoefficientField(a11=1.0, a22=lambda x, y: 1.0 + 0.3 * x, b1=0.2)
    raise ConfigError(f"unknown coefficient spec {spec!r}")


def _domain(cfg: ExperimentConfig):
    d = cfg.domain
    if d.shape == "stadium":
        return build_stadium(d.a, d.h, d.cap)
    return build_disk_domain((0.0, 0.0), d.R, d.h)


# --------------------------------------------------------------------------
# stadium


def _stadium_core(cfg: ExperimentConfig):
    """Everything of the stadium pipeline except output; returns (fields, report parts)."""
    metrics, checks, fields = {}, {}, {}
    a, h = cfg.domain.a, cfg.domain.h
    with stage("domain"):
        dom = build_stadium(a, h, cfg.domain.cap)
        metrics["a"] = a
        metrics["h"] = h
        metrics["interior_nodes"] = dom.n_interior
    with stage("torsion"):
        op = assemble_operator(dom, CoefficientField.laplacian())
        v = solve_torsion(dom, op=op, opts=LinearOptions(cfg.solver.linear_tol, cfg.solver.linear_max_iter,
                                                          cfg.solver.linear_method))
        x, y = dom.interior_coords()
        checks["torsion_below_profile"] = bool(np.all((v.values > 0) & (v.values < 0.5 * (1 - y**2))))
        metrics["max_v"] = v.max()
        fields["v"] = v
    with stage("minimize"):
        g = make_cutoff(cfg.cutoff)
        vm = cfg.varmin
        res = constrained_minimize(dom, g, VarminOptions(vm.tol, vm.max_steps, vm.semi_implicit), v=v)
        fields["u"] = res.u
        metrics.update(mu=res.mu, energy=res.energy, el_residual=res.el_residual,
                       constraint_residual=res.constraint_residual, descent_steps=res.iterations,
                       newton_steps=res.newton_steps, t_a=res.t_a, max_u=res.u.max())
        checks["el_residual"] = res.el_residual <= 1e-6
        checks["energy_monotone"] = bool(np.all(np.diff(res.history) <= 1e-12 * np.maximum(1, np.abs(res.history[1:]))))
    with stage("bounds"):
        b = verify_solution_bounds(res, v, g)
        checks.update(b.checks)
        metrics.update({k: v_ for k, v_ in b.details.items() if k != "mu"})
    with stage("extent"):
        ext = superlevel_extent(res.u)
        metrics.update(x_a=ext.x_a, y_a=ext.y_a)
        checks["extent_nonempty"] = not ext.empty
    with stage("torsion_levels"):
        scan_v = scan_nonconvex_levels(v, level_grid(0.0, v.max(), 50))
        checks["torsion_all_convex"] = scan_v.all_convex
        metrics["torsion_max_deficiency"] = max(r.hull_deficiency for r in scan_v.reports)
        sq = sqrt_concavity_check(v, 4 * h)
        checks["torsion_sqrt_concave"] = sq.passed
        metrics["torsion_sqrt_hessian_max"] = sq.max_eigenvalue
    with stage("levels"):
        lo, hi, n = cfg.levels or DEFAULT_STADIUM_LEVELS
        levels = level_grid(lo, hi, n)
        scan = scan_nonconvex_levels(res.u, levels)
        win = (0.5 * (1 - ext.y_a**2), 0.5)
        metrics["window_lo"], metrics["window_hi"] = win
        metrics["nonconvex_levels"] = len(scan.nonconvex_levels)
        metrics["u_all_convex"] = scan.all_convex
        if scan.window:
            metrics["nonconvex_lo"], metrics["nonconvex_hi"] = scan.window
        good = [r for r in scan.witnesses() if win[0] < r.lam < win[1]]
        witness = None
        if good:
            best = max(good, key=lambda r: r.hull_deficiency)
            witness = best.witness
            metrics.update(witness_lambda=best.lam, witness_deficiency=best.hull_deficiency,
                           witness_P=witness.P, witness_Q=witness.Q, witness_R=witness.R,
                           witness_uP=witness.uP, witness_uQ=witness.uQ, witness_uR=witness.uR)
        checks["witnesses_valid"] = all(r.witness.holds() for r in scan.reports if r.witness is not None)
        tp = three_point_test(res.u, ext.y_a, a)
        metrics.update(three_point_holds=tp.holds(), three_point_uP=tp.uP, three_point_uQ=tp.uQ,
                       three_point_uR=tp.uR, three_point_lambda=tp.lam)
        if a >= 2:
            metrics["profile_deviation_mid"] = profile_deviation(res.u, (a / 2 - 1, a / 2 + 1))
    return fields, metrics, checks, witness, levels


def _stadium(cfg: ExperimentConfig, report: RunReport, emit: dict):
    fields, metrics, checks, witness, levels = _stadium_core(cfg)
    report.metrics.update(metrics)
    report.checks.update(checks)
    report.witness_found = witness is not None
    emit.update(
        fields={"field_v": fields["v"], "field_u": fields["u"]},
        contours={"contours_u": (fields["u"], levels),
                  "contours_v": (fields["v"], level_grid(0, fields["v"].max(), 10))},
        figures={"figure_u": (fields["u"], levels[::8], witness, f"a = {cfg.domain.a:g}")},
    )


def _sweep_point(args):
    cfg, a = args
    from dataclasses import replace

    c = replace(cfg, domain=replace(cfg.domain, a=float(a)))
    _, metrics, checks, witness, _ = _stadium_core(c)
    return a, metrics, checks, witness is not None


# --------------------------------------------------------------------------
# ring


def _ring(cfg: ExperimentConfig, report: RunReport, emit: dict, eps_list=None):
    rc = cfg.ring
    m, c = report.metrics, report.checks
    nl = NonlinearOptions(cfg.solver.nonlinear_tol, cfg.solver.nonlinear_max_sweeps)
    with stage("domain"):
        omega1 = _domain(cfg)
        f = make_nonlinearity(rc.f)
        coeffs = make_coefficients(rc.coefficients)
    with stage("base"):
        base = solve_base_problem(omega1, coeffs, f, nl)
        m.update(M0=base.M0, base_uniqueness_gap=base.uniqueness_gap, base_residual=base.residual,
                 base_sweeps=base.sweeps, base_delta=base.delta, base_D=base.D)
        if base.lambda1 is not None:
            m["lambda1_shifted"] = base.lambda1
        c["base_uniqueness"] = base.uniqueness_gap <= 1e-6
        c["base_positive"] = base.v.min() > 0
        if f.mu is not None:
            c["base_below_mu"] = base.v.max() < f.mu
    with stage("hole_center"):
        if rc.x0_strategy != "walk":
            raise ConfigError(f"unknown x0 strategy {rc.x0_strategy!r}")
        x0 = select_hole_center(base.v, rc.ratio)
        m["x0"] = x0
        m["v_x0"] = float(base.v.evaluate([x0])[0])
        c["x0_below_max"] = m["v_x0"] < base.M0
    M = base.M0 if rc.M is None else rc.M
    m["M"] = M
    eps_list = rc.eps if eps_list is None else eps_list
    with stage("eps_sweep"):
        table, sols = epsilon_convergence_study(base, f, x0, eps_list, rc.r0, M, coeffs, rc.hole, nl)
    for e, s, gap in zip(table.eps, sols, table.gaps):
        tag = f"eps={e:g}"
        slack = nl.tol_feas * max(1.0, M)
        m[f"gap[{tag}]"] = gap
        m[f"uniqueness_gap[{tag}]"] = s.uniqueness_gap
        m[f"sweeps[{tag}]"] = s.sweeps
        m[f"D[{tag}]"] = s.D
        m[f"delta[{tag}]"] = s.delta
        c[f"bracket[{tag}]"] = min(s.bracket_margin) >= -slack
        c[f"uniqueness[{tag}]"] = s.uniqueness_gap <= 1e-6
        c[f"positive[{tag}]"] = s.u.min() > 0
        if f.mu is not None and M >= f.mu:
            c[f"below_M[{tag}]"] = s.u.max() < M
    if len(table.eps) > 1:
        c["convergence_decreasing"] = table.strictly_decreasing
    c["convergence_below_tol"] = table.smallest_eps_gap < rc.gap_tol
    with stage("witness"):
        k = int(np.argmin(table.eps))
        w = ring_nonconvexity_witness(sols[k].ubar, base.v, x0, M)
        report.witness_found = w.found
        m["witness_note"] = w.note or "found"
        if w.found:
            m.update(witness_lambda=w.lam, witness_dip=w.dip, witness_top=w.top,
                     witness_deficiency=w.report.hull_deficiency,
                     witness_P=w.witness.P, witness_Q=w.witness.Q, witness_R=w.witness.R)
            c["witness_nonconvex"] = (not w.report.is_convex) and w.report.hull_deficiency > DEFAULT_TOL
    lv = [w.lam] if w.found else []
    emit.update(
        fields={"field_v": base.v, "field_ubar": sols[k].ubar},
        contours={"contours_ubar": (sols[k].ubar, lv + list(level_grid(0, M, 8)))},
        figures={"figure_ubar": (sols[k].ubar, lv, w.witness, f"eps = {table.eps[k]:g}")},
    )
    return table, sols


# --------------------------------------------------------------------------
# sweep


def _sweep(cfg: ExperimentConfig, report: RunReport, emit: dict):
    if cfg.sweep.kind == "eps":
        table, sols = _ring(cfg, report, emit)
        base_v = emit["fields"]["field_v"]
        x0 = report.metrics["x0"]
        M = report.metrics["M"]
        found = {}
        for e, s in zip(table.eps, sols):
            found[e] = ring_nonconvexity_witness(s.ubar, base_v, x0, M).found
            report.metrics[f"witness[eps={e:g}]"] = found[e]
        hits = [e for e in table.eps if found[e]]
        if hits:
            report.metrics["eps_star"] = max(hits)
        return
    a_values = sorted(cfg.sweep.a_values)
    jobs = [(cfg, a) for a in a_values]
    with stage("a_sweep"):
        if cfg.sweep.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.sweep.workers) as pool:
                results = list(pool.map(_sweep_point, jobs))
        else:
            results = [_sweep_point(j) for j in jobs]
    rows = []
    for a, metrics, checks, found in results:
        rows.append((a, metrics["x_a"], metrics["y_a"], metrics["mu"], metrics["energy"],
                     metrics["three_point_holds"], found))
        for k, ok in checks.items():
            report.checks[f"{k}[a={a:g}]"] = ok
        report.metrics[f"x_a[a={a:g}]"] = metrics["x_a"]
        report.metrics[f"y_a[a={a:g}]"] = metrics["y_a"]
        report.metrics[f"witness[a={a:g}]"] = found
    xs = np.array([r[1] for r in rows])
    ys = np.array([r[2] for r in rows])
    report.checks["x_a_bounded"] = bool(xs.max() <= 1.1 * xs[0])
    report.checks["y_a_bounded_below"] = bool(ys.min() > 0)
    report.metrics["x_a_max"] = float(xs.max())
    report.metrics["y_a_min"] = float(ys.min())
    tp = [r[0] for r in rows if r[5]]
    if tp:
        report.metrics["a_star_three_point"] = min(tp)
    report.witness_found = any(r[6] for r in rows)
    emit["tables"] = {"sweep_a": (("a", "x_a", "y_a", "mu", "energy", "three_point", "witness"), rows)}


# --------------------------------------------------------------------------
# entry points


def emit_outputs(outdir, emit: dict, report: RunReport, flags) -> list:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    errors = []

    def attempt(fn, *args):
        try:
            files.append(fn(*args))
        except OSError as exc:
            errors.append(f"{args[0]}: {exc}")

    if flags.fields:
        for name, u in emit.get("fields", {}).items():
            attempt(outputs.write_field_csv, out / f"{name}.csv", u)
        for name, (header, rows) in emit.get("tables", {}).items():
            text = ",".join(header) + "\n" + "".join(
                ",".join(outputs._num(x) if isinstance(x, float) else str(x) for x in r) + "\n" for r in rows)
            p = out / f"{name}.csv"
            try:
                p.write_text(text)
                files.append(p)
            except OSError as exc:
                errors.append(f"{p}: {exc}")
    if flags.contours:
        for name, (u, levels) in emit.get("contours", {}).items():
            attempt(outputs.write_contours_csv, out / f"{name}.csv", u, levels)
    if flags.figures:
        for name, (u, levels, witness, title) in emit.get("figures", {}).items():
            attempt(outputs.write_figure_svg, out / f"{name}.svg", u, levels, witness, title)
    if flags.report:
        metrics = dict(report.metrics)
        metrics["pipeline"] = report.pipeline
        metrics["witness_found"] = report.witness_found
        if report.error:
            metrics["error"] = report.error
        attempt(outputs.write_report, out / "report.txt", metrics, report.checks)
    if errors:
        report.error = "; ".join(errors) if report.error is None else report.error + "; " + "; ".join(errors)
    if files:
        files.append(outputs.write_manifest(out / "manifest.txt", files, out))
    report.manifest = [str(f) for f in files]
    return report.manifest


def run_pipeline(cfg: ExperimentConfig, write: bool = True) -> RunReport:
    report = RunReport(cfg.pipeline)
    emit: dict = {}
    runner = {STADIUM: _stadium, RING: _ring, SWEEP: _sweep}[cfg.pipeline]
    try:
        runner(cfg, report, emit)
    except PipelineError as exc:
        report.error = str(exc)
        log.error("%s", exc)
    if write:
        emit_outputs(cfg.out, emit, report, cfg.output)
    return report


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qclab", description=__doc__.split("\n")[0])
    p.add_argument("--config", required=True, help="INI experiment file")
    p.add_argument("--pipeline", choices=(STADIUM, RING, SWEEP), help="override experiment.pipeline")
    p.add_argument("--out", help="output directory (overrides experiment.out)")
    p.add_argument("--levels", help="level grid 'a:b:n' (overrides [levels] range)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        cfg = override(cfg, pipeline=args.pipeline, out=args.out,
                       levels=parse_levels(args.levels) if args.levels else None)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    report = run_pipeline(cfg)
    for k in sorted(report.checks):
        print(f"{'PASS' if report.checks[k] else 'FAIL'} {k}")
    print(f"witness_found = {report.witness_found}")
    if report.error:
        print(f"error: {report.error}", file=sys.stderr)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
