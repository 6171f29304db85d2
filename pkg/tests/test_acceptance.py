"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines go straight
to the terminal so they also land in captured logs.
"""

import math
import shutil
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import first_bessel_zero
from qclab.cli import main
from qclab.cutoff import smoothstep_cutoff
from qclab.elliptic import logistic_nonlinearity, principal_eigenpair, solve_torsion
from qclab.geometry import build_disk_domain, build_polygon_domain
from qclab.quasiconcavity import (DEFAULT_TOL, level_grid, profile_deviation, scan_nonconvex_levels,
                                  sqrt_concavity_check, superlevel_extent, symmetry_monotonicity_check)
from qclab.ringlab import (RingProblem, ring_nonconvexity_witness, solve_base_problem,
                           solve_ring_problem)
from qclab.varmin import verify_solution_bounds

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def verdict(capsys):
    def emit(n, name, ok, detail=""):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n:2d} {name}: {detail}")
        assert ok, f"criterion {n} ({name}) failed: {detail}"

    return emit


@pytest.fixture(scope="module")
def cli_runs(tmp_path_factory):
    """Each acceptance config run twice into separate directories."""
    root = tmp_path_factory.mktemp("acceptance")
    out = {}
    for name in ("stadium.ini", "ring.ini"):
        codes, dirs = [], []
        for k in range(2):
            d = root / f"{Path(name).stem}_{k}"
            codes.append(main(["--config", str(CONFIGS / name), "--out", str(d)]))
            dirs.append(d)
        out[name] = (codes, dirs)
    yield out
    shutil.rmtree(root, ignore_errors=True)


def test_c01_torsion_oracle(verdict):
    t0 = time.perf_counter()
    d = build_disk_domain(R=1.0, h=1 / 64)
    v = solve_torsion(d)
    x, y = d.interior_coords()
    err = float(np.abs(v.values - (1 - x**2 - y**2) / 4).max())
    dt = time.perf_counter() - t0
    verdict(1, "torsion oracle", err <= 5e-4 and dt < 60, f"max err {err:.3e} (<= 5e-4), {dt:.2f} s")


def test_c02_eigen_oracle(verdict):
    j = first_bessel_zero()
    lam_disk = principal_eigenpair(build_disk_domain(R=1.0, h=1 / 64)).lambda1
    sq = build_polygon_domain([(-1, -1), (1, -1), (1, 1), (-1, 1)], 1 / 64)
    lam_sq = principal_eigenpair(sq).lambda1
    e1 = abs(lam_disk / j**2 - 1)
    e2 = abs(lam_sq / (math.pi**2 / 2) - 1)
    verdict(2, "eigen oracle", e1 <= 0.01 and e2 <= 0.01,
            f"disk {lam_disk:.5f} vs {j**2:.5f} (rel {e1:.2e}); square {lam_sq:.5f} vs "
            f"{math.pi**2 / 2:.5f} (rel {e2:.2e})")


def test_c03_constraint_and_multiplier(verdict, stadium8):
    _, _, res = stadium8
    ok = res.constraint_residual <= 1e-6 and res.mu > 0 and res.el_residual <= 1e-6
    verdict(3, "constraint and multiplier", ok,
            f"|int g - 1| {res.constraint_residual:.2e}, mu {res.mu:.6f}, EL residual {res.el_residual:.2e}")


def test_c04_pointwise_bounds(verdict, stadium8):
    _, v, res = stadium8
    b = verify_solution_bounds(res, v)
    ok = b.checks["v_below_u"] and b.checks["below_barrier"] and b.checks["max_above_one"]
    verdict(4, "pointwise bounds", ok,
            f"min(u-v) {b.details['min_u_minus_v']:.3e}, max(u-barrier) {b.details['max_u_minus_barrier']:.3f}, "
            f"max u {b.details['max_u']:.4f}")


def test_c05_symmetry_monotonicity(verdict, stadium8):
    _, _, res = stadium8
    rep = symmetry_monotonicity_check(res.u, tol=1e-6)
    verdict(5, "symmetry and monotonicity", rep.ok,
            f"asymmetry {rep.asymmetry:.2e}, monotonicity violation {rep.monotonicity_violation:.2e}")


def test_c06_extent_bounds(verdict, stadium_sweep):
    ext = {a: superlevel_extent(r[2].u) for a, r in sorted(stadium_sweep.items())}
    xs = np.array([e.x_a for e in ext.values()])
    ys = np.array([e.y_a for e in ext.values()])
    ok = xs.max() <= 1.1 * xs[0] and ys.min() > 0
    table = ", ".join(f"a={a}: ({e.x_a:.4f}, {e.y_a:.4f})" for a, e in ext.items())
    verdict(6, "extent bounds across sweep", ok, f"(x_a, y_a) {table}")


def test_c07_profile_band(verdict, stadium_sweep):
    _, _, res = stadium_sweep[12]
    dev = profile_deviation(res.u, (5.0, 7.0))
    verdict(7, "profile in mid band", dev <= 0.05, f"sup deviation {dev:.4f} (<= 0.05) at a=12")


def test_c08_main_counterexample(verdict, stadium_sweep, cli_runs):
    found = []
    torsion_convex = True
    for a, (d, v, res) in sorted(stadium_sweep.items()):
        ya = superlevel_extent(res.u).y_a
        win = (0.5 * (1 - ya**2), 0.5)
        scan = scan_nonconvex_levels(res.u, level_grid(win[0], win[1], 40))
        hits = [r for r in scan.witnesses() if win[0] < r.lam < win[1]]
        if hits:
            found.append(a)
        torsion_convex &= scan_nonconvex_levels(v, level_grid(0.0, v.max(), 50)).all_convex
    codes, _ = cli_runs["stadium.ini"]
    ok = bool(found) and torsion_convex and codes[0] == 0
    verdict(8, "stadium counterexample", ok,
            f"witness at a in {found}; torsion level sets all convex: {torsion_convex}; "
            f"exit code {codes[0]}")


def test_c09_sqrt_concavity(verdict, stadium_sweep):
    d = build_disk_domain(R=1.0, h=1 / 32)
    r1 = sqrt_concavity_check(solve_torsion(d), 4 * d.h)
    sd, sv, _ = stadium_sweep[8]
    r2 = sqrt_concavity_check(sv, 4 * sd.h)
    verdict(9, "sqrt concavity of torsion", r1.passed and r2.passed,
            f"max Hessian eigenvalue disk {r1.max_eigenvalue:.2e}, stadium {r2.max_eigenvalue:.2e}")


def test_c10_ring_base(verdict, logistic_base):
    f, base, _ = logistic_base
    fine = solve_base_problem(build_disk_domain(R=1.0, h=1 / 128), None, f)
    rel = abs(fine.M0 / base.M0 - 1)
    ok = base.lambda1 < 0 and base.uniqueness_gap <= 1e-6 and rel <= 0.01
    verdict(10, "ring base problem", ok,
            f"lambda1(-(L+gamma)) {base.lambda1:.4f} < 0, uniqueness gap {base.uniqueness_gap:.2e}, "
            f"M0 {base.M0:.5f} (h=1/64) vs {fine.M0:.5f} (h=1/128), rel {rel:.2e}")


def test_c11_ring_bracket_ceiling(verdict, logistic_base, ring_study):
    f, base, x0 = logistic_base
    s = ring_study[1][2]
    assert s.problem.eps == 0.05
    hi = solve_ring_problem(RingProblem(base.v.domain, f, x0, 0.05, f.mu, base.M0), two_sided=False, base=base)
    ok = min(s.bracket_margin) >= 0 and hi.u.max() < f.mu and min(hi.bracket_margin) >= 0
    verdict(11, "ring bracket and ceiling", ok,
            f"bracket margins {s.bracket_margin[0]:.3e}, {s.bracket_margin[1]:.3e}; "
            f"max u at M = {f.mu:g}: {hi.u.max():.4f}")


def test_c12_ring_convergence(verdict, ring_study):
    table, _ = ring_study
    ok = table.strictly_decreasing and table.smallest_eps_gap < 0.02
    gaps = ", ".join(f"{e:g}: {g:.4f}" for e, g in zip(table.eps, table.gaps))
    verdict(12, "ring convergence off B(x0, 0.3)", ok,
            f"gaps {gaps}; decreasing {table.strictly_decreasing}; smallest {table.smallest_eps_gap:.4f} (< 0.02)")


def test_c13_ring_counterexample(verdict, logistic_base, ring_study):
    _, base, x0 = logistic_base
    table, sols = ring_study
    k = int(np.argmin(table.eps))
    rw = ring_nonconvexity_witness(sols[k].ubar, base.v, x0, sols[k].problem.M)
    ok = rw.found and rw.witness.holds() and not rw.report.is_convex and rw.report.hull_deficiency > DEFAULT_TOL
    detail = (f"eps {table.eps[k]:g}, lambda {rw.lam:.4f}, dip {rw.dip:.4f} < top {rw.top:.4f}, "
              f"deficiency {rw.report.hull_deficiency:.4f}") if rw.found else rw.note
    verdict(13, "ring counterexample", ok, detail)


def test_c14_determinism(verdict, cli_runs):
    diffs, count = [], 0
    for name, (_, (a, b)) in cli_runs.items():
        for p in sorted(a.glob("*.csv")):
            count += 1
            if p.read_bytes() != (b / p.name).read_bytes():
                diffs.append(f"{name}:{p.name}")
    verdict(14, "determinism", count > 0 and not diffs, f"{count} CSV files compared, differing: {diffs or 'none'}")
