import numpy as np
import pytest

from qclab.cutoff import smoothstep_cutoff
from qclab.elliptic import logistic_nonlinearity, solve_torsion
from qclab.geometry import build_disk_domain, build_stadium
from qclab.ringlab import select_hole_center, solve_base_problem
from qclab.varmin import constrained_minimize


@pytest.fixture(scope="session")
def stadium8():
    d = build_stadium(8, 1 / 32)
    v = solve_torsion(d)
    res = constrained_minimize(d, smoothstep_cutoff(), v=v)
    return d, v, res


@pytest.fixture(scope="session")
def stadium_sweep():
    out = {}
    g = smoothstep_cutoff()
    for a in (4, 6, 8, 10, 12):
        d = build_stadium(a, 1 / 32)
        v = solve_torsion(d)
        out[a] = (d, v, constrained_minimize(d, g, v=v))
    return out


@pytest.fixture(scope="session")
def disk64():
    return build_disk_domain(R=1.0, h=1 / 64)


@pytest.fixture(scope="session")
def logistic_base(disk64):
    f = logistic_nonlinearity(10.0, 2.0)
    base = solve_base_problem(disk64, None, f)
    x0 = select_hole_center(base.v, 0.5)
    return f, base, x0


@pytest.fixture(scope="session")
def ring_study(logistic_base):
    from qclab.ringlab import epsilon_convergence_study

    f, base, x0 = logistic_base
    return epsilon_convergence_study(base, f, x0, (0.2, 0.1, 0.05, 0.025), r0=0.3)
