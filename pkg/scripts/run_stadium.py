"""Stadium experiment: minimiser on the stadium of half-length a and its level-set scan.

    python3 scripts/run_stadium.py --a 12 --out runs/stadium_a12
"""

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from qclab.cli import run_pipeline
from qclab.config import load_config, parse_levels

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(CONFIGS / "stadium.ini"))
    p.add_argument("--a", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--levels")
    p.add_argument("--out")
    args = p.parse_args()
    cfg = load_config(args.config)
    dom = replace(cfg.domain, **{k: getattr(args, k) for k in ("a", "h") if getattr(args, k) is not None})
    cfg = replace(cfg, domain=dom, out=args.out or cfg.out,
                  levels=parse_levels(args.levels) if args.levels else cfg.levels).validate()
    rep = run_pipeline(cfg)
    m = rep.metrics
    print(f"a = {dom.a:g}, h = {dom.h:g}: mu = {m['mu']:.6f}, max u = {m['max_u']:.4f}, "
          f"x_a = {m['x_a']:.4f}, y_a = {m['y_a']:.4f}")
    if rep.witness_found:
        print(f"witness at lambda = {m['witness_lambda']:.4f}: P = {m['witness_P']}, "
              f"Q = {m['witness_Q']}, R = {m['witness_R']}, deficiency {m['witness_deficiency']:.4f}")
    else:
        print("no non-convex level in the window")
    print("failed checks:", [k for k, ok in rep.checks.items() if not ok] or "none")
    print("artifacts in", cfg.out)
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
