"""Artifact writers: field and contour CSV, plain-text reports, SVG figures."""

from __future__ import annotations

import io
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .elliptic import ScalarField
from .quasiconcavity import extract_superlevel


def _num(x) -> str:
    # shortest round-trip representation
    return repr(float(x))


def write_field_csv(path, u: ScalarField) -> Path:
    d = u.domain
    G = u.grid()
    X, Y = d.grid_coords()
    m = d.interior_mask
    buf = io.StringIO()
    buf.write("nx,ny,h,origin_x,origin_y\n")
    buf.write(f"{d.nx},{d.ny},{_num(d.h)},{_num(d.origin[0])},{_num(d.origin[1])}\n")
    buf.write("i,j,x,y,value,interior\n")
    for i in range(d.nx):
        for j in range(d.ny):
            buf.write(f"{i},{j},{_num(X[i, j])},{_num(Y[i, j])},{_num(G[i, j])},{int(m[i, j])}\n")
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def read_field_csv(path):
    """Inverse of :func:`write_field_csv`: (meta dict, (nx, ny) values, mask)."""
    lines = Path(path).read_text().splitlines()
    nx, ny, h, ox, oy = lines[1].split(",")
    nx, ny = int(nx), int(ny)
    vals = np.zeros((nx, ny))
    mask = np.zeros((nx, ny), dtype=bool)
    for row in lines[3:]:
        i, j, _, _, v, flag = row.split(",")
        vals[int(i), int(j)] = float(v)
        mask[int(i), int(j)] = flag == "1"
    return {"nx": nx, "ny": ny, "h": float(h), "origin": (float(ox), float(oy))}, vals, mask


def write_contours_csv(path, u: ScalarField, levels: Iterable[float]) -> Path:
    buf = io.StringIO()
    buf.write("contour_id,vertex,x,y,lambda\n")
    cid = 0
    for lam in levels:
        S = extract_superlevel(u, float(lam))
        for c in S.contours:
            for k, (x, y) in enumerate(c):
                buf.write(f"{cid},{k},{_num(x)},{_num(y)},{_num(lam)}\n")
            cid += 1
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


def format_report(metrics: dict, checks: dict) -> str:
    out = ["[metrics]"]
    for k in sorted(metrics):
        v = metrics[k]
        out.append(f"{k} = {_num(v) if isinstance(v, (float, np.floating)) else v}")
    out.append("")
    out.append("[checks]")
    for k in sorted(checks):
        out.append(f"{k} = {'PASS' if checks[k] else 'FAIL'}")
    return "\n".join(out) + "\n"


def write_report(path, metrics: dict, checks: dict) -> Path:
    path = Path(path)
    path.write_text(format_report(metrics, checks))
    return path


def write_figure_svg(path, u: ScalarField, levels: Iterable[float] = (),
                     witness=None, title: str = "") -> Path:
    """Heat map of the field with superlevel contours and witness markers."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    d = u.domain
    G = np.ma.masked_array(u.grid(), mask=~d.interior_mask)
    X, Y = d.grid_coords()
    with matplotlib.rc_context({"svg.hashsalt": "qclab", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(8, max(2.0, 8 * d.ny / d.nx + 0.8)))
        ax.pcolormesh(X, Y, G, shading="nearest", cmap="viridis")
        for lam in levels:
            for c in extract_superlevel(u, float(lam)).contours:
                cc = np.vstack([c, c[:1]])
                ax.plot(cc[:, 0], cc[:, 1], color="white", lw=0.6)
        if witness is not None:
            pts = np.array([witness.P, witness.Q, witness.R])
            ax.plot(pts[:, 0], pts[:, 1], "--", color="red", lw=0.8)
            ax.scatter(pts[[0, 2], 0], pts[[0, 2], 1], color="red", s=14, zorder=3)
            ax.scatter(pts[1:2, 0], pts[1:2, 1], color="orange", marker="x", s=20, zorder=3)
        ax.set_aspect("equal")
        ax.set_title(title)
        fig.tight_layout()
        fig.savefig(Path(path), format="svg", metadata={"Date": None})
        plt.close(fig)
    return Path(path)


def write_manifest(path, files: Iterable[Path], root: Optional[Path] = None) -> Path:
    root = Path(path).parent if root is None else root
    names = sorted(str(Path(f).relative_to(root)) for f in files)
    Path(path).write_text("\n".join(names) + "\n")
    return Path(path)
