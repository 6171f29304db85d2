import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qclab.cutoff import eval_cutoff, make_cutoff, oscillatory_cutoff, smoothstep_cutoff, theta

# frozen from a 30-digit mpmath quadrature of theta on (1, 2), split into 200 panels
KAPPA = 141.04423822947945147
G_OSC = {1.05: 2.28542041986169749e-10, 1.1: 1.88150063559990528e-05, 1.3: 0.076380242969704623,
         1.5: 0.364365941827481751, 1.9: 0.999965239400507424}


@pytest.mark.parametrize("s, expected", [(0.5, 0.0), (3.0, 1.0), (1.5, 0.5), (1.0, 0.0), (2.0, 1.0)])
def test_smoothstep_values(s, expected):
    assert float(smoothstep_cutoff()(s)) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("s, pair", [(1.0, (0.0, 0.0)), (2.0, (1.0, 0.0)), (1.5, (0.5, 1.875))])
def test_eval_cutoff(s, pair):
    g, dg = eval_cutoff(smoothstep_cutoff(), s)
    assert (float(g), float(dg)) == pytest.approx(pair, abs=1e-14)


def test_smoothstep_derivative_fd():
    g = smoothstep_cutoff()
    d = 1e-6
    assert float((g(1.5 + d) - g(1.5 - d)) / (2 * d)) == pytest.approx(1.875, abs=1e-8)


def test_kappa_matches_quadrature():
    assert oscillatory_cutoff().kappa == pytest.approx(KAPPA, rel=1e-8)


@pytest.mark.parametrize("s", sorted(G_OSC))
def test_oscillatory_values(s):
    assert float(oscillatory_cutoff()(s)) == pytest.approx(G_OSC[s], abs=1e-9)


def test_oscillatory_endpoints():
    g = oscillatory_cutoff()
    assert float(g(1.0)) == 0.0 and float(g(2.0)) == 1.0
    assert float(g(2.0 - 1e-9)) == pytest.approx(1.0, abs=1e-12)


def test_oscillatory_second_derivative_changes_sign():
    g = oscillatory_cutoff()
    k = np.arange(8, 120)
    s = 1 + 2.0 ** (-k / 16)
    d2 = g.second_derivative(s)
    d2 = d2[d2 != 0]
    assert (d2 > 0).any() and (d2 < 0).any()
    # sign keeps flipping as s -> 1+
    assert np.count_nonzero(np.diff(np.sign(d2))) > 10


@pytest.mark.parametrize("variant", ["smoothstep", "oscillatory"])
def test_monotone_on_grid(variant):
    g = make_cutoff(variant)
    s = np.linspace(0.5, 2.5, 20001)
    assert np.all(np.diff(g(s)) >= 0)


def test_unknown_variant():
    with pytest.raises(ValueError):
        make_cutoff("sigmoid")


def test_theta_nonnegative():
    s = np.linspace(0.9, 2.1, 5001)
    assert np.all(theta(s) >= 0)


@pytest.mark.parametrize("variant", ["smoothstep", "oscillatory"])
@settings(max_examples=200, deadline=None)
@given(s=st.floats(-5, 5, allow_nan=False))
def test_cutoff_invariants(variant, s):
    g = make_cutoff(variant)
    val, dval = eval_cutoff(g, s)
    assert 0.0 <= val <= 1.0
    assert dval >= 0.0
    if s <= 1 or s >= 2:
        assert dval == 0.0
        assert val == (0.0 if s <= 1 else 1.0)


@settings(max_examples=200, deadline=None)
@given(s=st.floats(1.0 + 2e-5, 2.0 - 2e-5) | st.floats(-3, 1 - 2e-5) | st.floats(2 + 2e-5, 5))
def test_smoothstep_derivative_consistent(s):
    g = smoothstep_cutoff()
    d = 1e-5
    fd = (g(s + d) - g(s - d)) / (2 * d)
    assert abs(float(g.derivative(s)) - float(fd)) <= 1e-6


@settings(max_examples=100, deadline=None)
@given(s=st.floats(1.0, 2.0))
def test_smoothstep_point_symmetry(s):
    g = smoothstep_cutoff()
    assert float(g(s) + g(3 - s)) == pytest.approx(1.0, abs=1e-14)


def test_random_sample_invariants():
    rng = np.random.default_rng(20240601)
    s = rng.uniform(-1, 4, 10_000)
    d = 1e-5
    s = s[(np.abs(s - 1) > d) & (np.abs(s - 2) > d)]
    g = smoothstep_cutoff()
    val, dval = eval_cutoff(g, s)
    assert np.all((val >= 0) & (val <= 1) & (dval >= 0))
    assert np.abs(dval - (g(s + d) - g(s - d)) / (2 * d)).max() <= 1e-6


def test_oscillatory_random_sample():
    # theta oscillates on the scale (s-1)^3, so the difference step must be small
    rng = np.random.default_rng(7)
    s = rng.uniform(1.02, 1.98, 10_000)
    d = 1e-7
    g = oscillatory_cutoff()
    val, dval = eval_cutoff(g, s)
    assert np.all((val >= 0) & (val <= 1) & (dval >= 0))
    assert np.abs(dval - (g(s + d) - g(s - d)) / (2 * d)).max() <= 1e-6
