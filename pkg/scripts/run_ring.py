"""Ring experiment: base problem on the unit disk, eps sweep, convergence table and witness.

With ``--ratio-scan`` it also tabulates, for several hole positions, the
exterior gap at the smallest eps and whether a witness exists there.

    python3 scripts/run_ring.py --out runs/ring
    python3 scripts/run_ring.py --ratio-scan 0.5 0.8 0.9 0.95
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from qclab.cli import make_coefficients, make_nonlinearity, run_pipeline
from qclab.config import load_config
from qclab.geometry import build_disk_domain
from qclab.ringlab import epsilon_convergence_study, ring_nonconvexity_witness, select_hole_center, solve_base_problem

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def ratio_scan(cfg, ratios):
    rc = cfg.ring
    f = make_nonlinearity(rc.f)
    base = solve_base_problem(build_disk_domain(R=cfg.domain.R, h=cfg.domain.h), make_coefficients(rc.coefficients), f)
    eps = min(rc.eps)
    print(f"M0 = {base.M0:.5f}; eps = {eps:g}, r0 = {rc.r0:g}")
    print(f"{'ratio':>6} {'x0':>16} {'gap':>8} {'witness':>8}")
    for r in ratios:
        x0 = select_hole_center(base.v, r)
        table, sols = epsilon_convergence_study(base, f, x0, (eps,), rc.r0, two_sided=False)
        w = ring_nonconvexity_witness(sols[0].ubar, base.v, x0, base.M0)
        print(f"{r:6.3f} {str(x0):>16} {table.gaps[0]:8.4f} {str(w.found):>8}")


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(CONFIGS / "ring.ini"))
    p.add_argument("--out")
    p.add_argument("--ratio-scan", type=float, nargs="+")
    args = p.parse_args()
    cfg = load_config(args.config)
    if args.ratio_scan:
        ratio_scan(cfg, args.ratio_scan)
        return 0
    cfg = replace(cfg, out=args.out or cfg.out)
    rep = run_pipeline(cfg)
    m = rep.metrics
    print(f"M0 = {m['M0']:.5f}, x0 = {m['x0']}, v(x0) = {m['v_x0']:.4f}")
    for e in cfg.ring.eps:
        print(f"eps = {e:<6g} gap = {m[f'gap[eps={e:g}]']:.4f}  sweeps = {m[f'sweeps[eps={e:g}]']}")
    print("witness:", m["witness_note"], f"lambda = {m['witness_lambda']:.4f}" if rep.witness_found else "")
    print("failed checks:", [k for k, ok in rep.checks.items() if not ok] or "none")
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
