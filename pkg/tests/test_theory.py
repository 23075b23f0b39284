import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conbias.network import from_label, mixing_matrix, stationary
from conbias.theory import (
    Region,
    Side,
    bias_decomposition,
    classify_region,
    degroot_consensus,
    impartial_limit,
    is_extreme_capable,
    limiting_opinions,
    mean_gamma,
    network_consensus,
)

unit = st.floats(0.0, 1.0)
confirm = st.floats(0.5, 1.0)


@pytest.mark.parametrize("theta,left,right", [(0.1, 0.08, 0.28), (0.5, 0.40, 0.60), (0.9, 0.72, 0.92)])
def test_limits_of_the_worked_example(theta, left, right):
    lp = limiting_opinions(theta, 0.2, 1.0)
    assert abs(lp.y_left - left) <= 1e-12 and abs(lp.y_right - right) <= 1e-12


def test_limits_with_partial_bias():
    lp = limiting_opinions(0.8, 0.3, 0.6)
    assert lp.y_right == pytest.approx(0.74, abs=1e-12)
    assert lp.y_left == pytest.approx(0.68, abs=1e-12)
    assert limiting_opinions(0.37, 0.0, 0.9).gap == 0.0


def test_bias_decomposition_examples():
    left, right = bias_decomposition(0.8, 0.3, 0.6)
    assert right == pytest.approx(-0.06) and left == pytest.approx(-0.12)
    assert bias_decomposition(0.7, 0.4, 0.7)[1] == 0.0
    left, right = bias_decomposition(0.5, 0.33, 0.9)
    assert abs(left) == pytest.approx(abs(right))


def test_less_biased_side_via_limits():
    from conbias.theory import less_biased_side
    assert less_biased_side(0.8) is Side.RIGHT
    assert less_biased_side(0.2) is Side.LEFT
    assert less_biased_side(0.5) is Side.TIE


def test_region_examples():
    assert classify_region(0.9, 0.2, 1.0) is Region.R
    assert classify_region(0.1, 0.2, 1.0) is Region.L
    assert classify_region(0.5, 0.3, 0.8) is Region.W
    assert classify_region(0.8, 0.6, 1.0) is Region.W
    assert classify_region(0.2, 0.6, 1.0) is Region.W
    # the boundary itself belongs to W
    assert classify_region(0.75, 0.25 / 0.75, 1.0) is Region.W
    assert classify_region(0.75, 0.25 / 0.75 - 1e-9, 1.0) is Region.R
    with pytest.raises(ValueError):
        classify_region(0.8, 0.2, 0.3)


@given(unit, unit, confirm)
def test_gap_formula(theta, mu, gamma):
    lp = limiting_opinions(theta, mu, gamma)
    assert lp.gap == pytest.approx(mu * (2 * gamma - 1), abs=1e-12)
    assert 0 <= lp.y_left <= lp.y_right <= 1 + 1e-12


@given(unit, unit, st.floats(0.5001, 1.0))
def test_regions_agree_with_limits(theta, mu, gamma):
    lp = limiting_opinions(theta, mu, gamma)
    region = classify_region(theta, mu, gamma)
    margin = 1e-9
    if min(lp.y_left, lp.y_right) > 0.5 + margin:
        assert region is Region.R
    if max(lp.y_left, lp.y_right) < 0.5 - margin:
        assert region is Region.L
    if region is Region.R:
        assert lp.y_left > 0.5 - margin
    if region is Region.L:
        assert lp.y_right < 0.5 + margin


def test_impartial_examples():
    assert impartial_limit(0.5, 0.77) == 0.5
    assert impartial_limit(0.3, 0.4) == pytest.approx(0.38)
    assert impartial_limit(0.9, 1.0) == 0.5


@given(unit, unit)
def test_impartial_is_midpoint(theta, mu):
    lp = limiting_opinions(theta, mu, 0.5)
    assert impartial_limit(theta, mu) == pytest.approx((lp.y_left + lp.y_right) / 2, abs=1e-12)


def test_extreme_capability():
    assert is_extreme_capable(1.0, 1.0)
    assert not is_extreme_capable(0.99, 1.0)
    assert not is_extreme_capable(1.0, 0.5)


def test_degroot_examples():
    pi = np.array([0.25, 0.5, 0.25])
    assert degroot_consensus(pi, [1, 1, 1], [1, 1, 1]) == 0.5
    assert degroot_consensus(pi, [1, 1, 31], [31, 1, 1]) == pytest.approx(8.5 / 17)
    assert degroot_consensus(pi, [31, 1, 1], [1, 1, 31]) == pytest.approx(0.5)


@given(st.lists(st.floats(1, 50), min_size=3, max_size=3), st.lists(st.floats(1, 50), min_size=3, max_size=3),
       st.floats(0.01, 100))
def test_degroot_scale_invariance(a, b, c):
    pi = stationary(mixing_matrix(from_label("B"), 0.5))
    base = degroot_consensus(pi, a, b)
    assert degroot_consensus(pi, np.multiply(a, c), np.multiply(b, c)) == pytest.approx(base, rel=1e-12)


def test_network_consensus_examples():
    gam = (0.8, 1.0, 0.2)
    pi_line = stationary(mixing_matrix(from_label("B"), 0.5))
    assert mean_gamma(gam, pi_line) == pytest.approx(0.75)
    lp = network_consensus(0.5, 0.5, gam, pi_line)
    assert (lp.y_right, lp.y_left) == (pytest.approx(0.625), pytest.approx(0.375))
    pi_tri = stationary(mixing_matrix(from_label("C"), 0.5))
    lp = network_consensus(0.5, 0.5, gam, pi_tri)
    assert lp.y_right == pytest.approx(0.25 + 1 / 3) and lp.y_left == pytest.approx(0.25 + 1 / 6)


@given(unit, unit, confirm, st.sampled_from(["B", "D", "E", "H"]))
def test_uniform_gammas_reduce_to_single_agent(theta, mu, gamma, label):
    pi = stationary(mixing_matrix(from_label(label), 0.5))
    lp = network_consensus(theta, mu, np.full(len(pi), gamma), pi)
    single = limiting_opinions(theta, mu, gamma)
    assert lp.y_left == pytest.approx(single.y_left, abs=1e-12)
    assert lp.y_right == pytest.approx(single.y_right, abs=1e-12)


def test_out_of_range_inputs():
    with pytest.raises(ValueError):
        limiting_opinions(1.2, 0.1, 1.0)
    with pytest.raises(ValueError):
        impartial_limit(0.3, -0.1)
