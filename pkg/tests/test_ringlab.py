import numpy as np
import pytest

from oracles import RADIAL_LOGISTIC_MAX
from qclab.cli import make_coefficients
from qclab.elliptic import (CoefficientField, NonlinearOptions, ScalarField, constant_nonlinearity,
                            logistic_nonlinearity, solve_torsion)
from qclab.geometry import INNER, build_disk_domain, build_polygon_domain
from qclab.ringlab import (HypothesisError, RingProblem, check_hypotheses, epsilon_convergence_study,
                           exterior_gap, extend_by_hole, ring_nonconvexity_witness, select_hole_center,
                           solve_base_problem, solve_ring_problem)


def test_base_max_matches_radial_oracle(logistic_base):
    _, base, _ = logistic_base
    assert base.M0 == pytest.approx(RADIAL_LOGISTIC_MAX, abs=2e-3)
    assert base.uniqueness_gap <= 1e-6
    assert base.lambda1 < 0


def test_base_bracket_ordered(logistic_base):
    _, base, _ = logistic_base
    assert np.all(base.sub.values <= base.v.values + 1e-12)
    assert np.all(base.v.values <= base.sup.values + 1e-12)


def test_hypothesis_rejects_small_gamma():
    d = build_disk_domain(R=1.0, h=1 / 16)
    with pytest.raises(HypothesisError) as err:
        check_hypotheses(d, CoefficientField.laplacian(), logistic_nonlinearity(2.0, 2.0))
    assert err.value.measured == pytest.approx(5.7832, rel=0.03)


def test_hypothesis_rejects_increasing_ratio():
    from qclab.elliptic import NonlinearitySpec

    f = NonlinearitySpec(lambda x, y, s: s + s**2, sup=10.0, zero_at_zero=True, zeta=lambda x, y: 1.0 + 0 * x)
    with pytest.raises(HypothesisError, match="nonincreasing"):
        check_hypotheses(build_disk_domain(R=1.0, h=1 / 16), CoefficientField.laplacian(), f)


def test_constant_source_is_torsion():
    d = build_disk_domain(R=1.0, h=1 / 32)
    base = solve_base_problem(d, None, constant_nonlinearity(1.0))
    assert np.abs(base.v.values - solve_torsion(d).values).max() <= 1e-7


def test_hole_centre_on_radial_field(logistic_base, disk64):
    _, base, x0 = logistic_base
    assert x0[1] == 0.0 and x0[0] > 0
    assert base.v.evaluate(np.array([x0]))[0] <= 0.5 * base.M0
    # previous node along the ray is above the threshold
    assert base.v.evaluate(np.array([[x0[0] - disk64.h, 0.0]]))[0] > 0.5 * base.M0


def test_hole_centre_rejects_flat_field(disk64):
    with pytest.raises(ValueError, match="flat"):
        select_hole_center(ScalarField(disk64, np.ones(disk64.n_interior)))


def test_M_below_base_max_rejected(logistic_base):
    f, base, x0 = logistic_base
    with pytest.raises(ValueError, match="below"):
        RingProblem(base.v.domain, f, x0, 0.05, base.M0 - 0.1, base.M0)


def test_ring_bracket_each_sweep(ring_study):
    _, sols = ring_study
    s = sols[2]
    assert s.problem.eps == 0.05
    assert min(s.bracket_margin) >= 0
    assert s.uniqueness_gap <= 1e-6
    assert s.u.min() > 0


def test_ring_ceiling_with_large_M(logistic_base):
    f, base, x0 = logistic_base
    p = RingProblem(base.v.domain, f, x0, 0.05, 10.0, base.M0)
    s = solve_ring_problem(p, two_sided=False, base=base)
    assert s.u.max() < 10.0
    assert min(s.bracket_margin) >= 0


def test_extend_by_hole_sets_M(ring_study):
    _, sols = ring_study
    s = sols[0]
    om = s.problem.omega1
    x, y = om.interior_coords()
    inside = np.hypot(x - s.problem.x0[0], y - s.problem.x0[1]) < 0.05
    assert np.all(s.ubar.values[inside] == s.problem.M)


def test_gaps_decrease(ring_study):
    table, _ = ring_study
    assert table.strictly_decreasing
    assert all(g > 0 for g in table.gaps)


def test_gap_of_base_to_itself_is_zero(logistic_base):
    _, base, x0 = logistic_base
    assert exterior_gap(base.v, base.v, x0, 0.3) == 0.0


def test_exclusion_radius_must_cover_hole(logistic_base):
    f, base, x0 = logistic_base
    with pytest.raises(ValueError, match="exclusion"):
        epsilon_convergence_study(base, f, x0, (0.8,), r0=0.3)


def test_ring_witness_found(ring_study, logistic_base):
    _, base, x0 = logistic_base
    s = ring_study[1][2]
    rw = ring_nonconvexity_witness(s.ubar, base.v, x0, s.problem.M)
    assert rw.found and rw.witness.holds()
    assert not rw.report.is_convex


def test_no_witness_without_hole(logistic_base):
    _, base, x0 = logistic_base
    rw = ring_nonconvexity_witness(base.v, base.v, x0, base.M0)
    assert not rw.found and rw.witness is None


def test_mild_coefficients_ring():
    d = build_disk_domain(R=1.0, h=1 / 32)
    coeffs = make_coefficients("mild")
    f = logistic_nonlinearity(10.0, 2.0)
    base = solve_base_problem(d, coeffs, f)
    assert base.uniqueness_gap <= 1e-6
    x0 = select_hole_center(base.v, 0.5)
    s = solve_ring_problem(RingProblem(d, f, x0, 0.1, base.M0, base.M0, coeffs), base=base)
    assert s.uniqueness_gap <= 1e-6 and min(s.bracket_margin) >= 0
    assert s.u.max() < f.mu


def test_square_hole_ring(logistic_base):
    f, base, x0 = logistic_base
    p = RingProblem(base.v.domain, f, x0, 0.1, base.M0, base.M0,
                    hole=[(-1, -1), (1, -1), (1, 1), (-1, 1)])
    s = solve_ring_problem(p, two_sided=False, base=base)
    assert s.u.domain.region[s.u.domain.region == INNER].size > 0
    assert min(s.bracket_margin) >= 0
