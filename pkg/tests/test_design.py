import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftbandit.design import (
    DiscountedDesign,
    RadiusParams,
    linear_radius,
    weighted_potential_bound,
)
from driftbandit.numerics import DimensionMismatch


def batch_design(xs, rs, gamma, lam):
    """Weighted normal equations formed directly from the stored history."""
    t = len(xs)
    d = xs[0].shape[0]
    V = lam * np.eye(d)
    b = np.zeros(d)
    for s, (x, r) in enumerate(zip(xs, rs), start=1):
        w = gamma ** (t - s)
        V += w * np.outer(x, x)
        b += w * r * x
    return V, b


def test_update_fresh_design_example():
    design = DiscountedDesign(2, 0.5, 1.0)
    design.update(np.array([1.0, 0.0]), 1.0)
    assert np.allclose(design.V, np.diag([2.0, 1.0]))
    assert np.allclose(design.b, [1.0, 0.0])
    assert design.weight_sum == pytest.approx(1.0)
    assert design.t == 1


def test_update_undiscounted_repeats():
    x = np.array([0.6, -0.8])
    design = DiscountedDesign(2, 1.0, 0.5)
    for _ in range(7):
        design.update(x, 0.3)
    assert np.allclose(design.V, 0.5 * np.eye(2) + 7 * np.outer(x, x))
    assert design.weight_sum == pytest.approx(7.0)


def test_update_zero_arm():
    design = DiscountedDesign(3, 0.8, 2.0)
    design.update(np.array([1.0, 1.0, 0.0]), 1.0)
    v_before, b_before = design.V.copy(), design.b.copy()
    design.update(np.zeros(3), 0.0)
    assert np.allclose(design.V, 0.8 * v_before + 0.2 * 2.0 * np.eye(3))
    assert np.allclose(design.b, 0.8 * b_before)


def test_update_dimension_mismatch():
    design = DiscountedDesign(2, 0.9, 1.0)
    with pytest.raises(DimensionMismatch):
        design.update(np.ones(3), 0.0)


def test_ridge_no_data_is_zero():
    assert np.allclose(DiscountedDesign(4, 0.9, 1.0).ridge_estimate(), 0.0)


@pytest.mark.parametrize("gamma", [0.5, 0.9, 1.0])
def test_ridge_single_unit_observation(gamma):
    design = DiscountedDesign(3, gamma, 1.0)
    design.update(np.array([1.0, 0.0, 0.0]), 1.0)
    assert np.allclose(design.ridge_estimate(), [0.5, 0.0, 0.0])


@pytest.mark.parametrize("gamma", [0.5, 0.9, 0.99, 1.0])
def test_ridge_matches_batch_solution(gamma):
    rng = np.random.default_rng(42)
    d = 3
    design = DiscountedDesign(d, gamma, 0.7)
    xs, rs = [], []
    for _ in range(50):
        x = rng.standard_normal(d)
        r = float(rng.standard_normal())
        xs.append(x)
        rs.append(r)
        design.update(x, r)
    V, b = batch_design(xs, rs, gamma, 0.7)
    assert np.max(np.abs(design.V - V)) < 1e-9
    assert np.max(np.abs(design.ridge_estimate() - np.linalg.solve(V, b))) < 1e-9


@settings(max_examples=40, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**31 - 1),
    st.sampled_from([0.5, 0.9, 0.99, 1.0]),
    st.integers(min_value=1, max_value=5),
    st.integers(min_value=0, max_value=60),
)
def test_recursion_definition_equivalence(seed, gamma, d, t):
    rng = np.random.default_rng(seed)
    lam = float(rng.uniform(0.3, 3.0))
    design = DiscountedDesign(d, gamma, lam)
    xs, rs = [], []
    for _ in range(t):
        x = rng.standard_normal(d)
        r = float(rng.standard_normal())
        xs.append(x)
        rs.append(r)
        design.update(x, r)
    if t:
        V, b = batch_design(xs, rs, gamma, lam)
        assert np.max(np.abs(design.V - V)) < 1e-9
        assert np.max(np.abs(design.b - b)) < 1e-9
    expected_w = t if gamma == 1.0 else (1.0 - gamma**t) / (1.0 - gamma)
    assert design.weight_sum == pytest.approx(expected_w, abs=1e-9)
    # discounting never drops the spectrum below the regularizer
    assert np.linalg.eigvalsh(design.V).min() >= lam - 1e-9


def test_linear_radius_hand_value():
    params = RadiusParams(S=1.0, L=1.0, R=1.0, delta=0.5, d=2)
    assert linear_radius(params, 2.0, 0.0) == pytest.approx(2.59162358488857, abs=1e-10)


def test_linear_radius_noiseless():
    params = RadiusParams(S=2.0, L=1.0, R=0.0, delta=0.1, d=3)
    for W in (0.0, 5.0, 500.0):
        assert linear_radius(params, 3.0, W) == pytest.approx(math.sqrt(3.0) * 2.0)


def test_linear_radius_monotone_in_weight():
    params = RadiusParams(S=1.0, L=1.0, R=1.0, delta=0.1, d=2)
    assert linear_radius(params, 1.0, 20.0) > linear_radius(params, 1.0, 10.0)
    assert linear_radius(params, 1.0, 0.0) >= math.sqrt(1.0) * params.S


def test_potential_bound_hand_value():
    W = (1.0 - 0.9**10) / 0.1
    got = weighted_potential_bound(10, 0.9, 1.0, 1.0, 2, W)
    assert got == pytest.approx(10.008310833816477, abs=1e-9)


def test_potential_bound_undiscounted_limit():
    got = weighted_potential_bound(50, 1.0, 2.0, 1.0, 3, 50.0)
    assert got == pytest.approx(2 * 1.0 * 3 * math.log(1 + 50.0 / 6.0))


@settings(max_examples=30, deadline=None)
@given(
    st.sampled_from([0.5, 0.9, 1.0]),
    st.floats(min_value=0.2, max_value=4.0),
    st.floats(min_value=0.2, max_value=2.0),
    st.integers(min_value=1, max_value=5),
    st.integers(min_value=1, max_value=300),
)
def test_potential_bound_nonnegative(gamma, lam, L, d, T):
    W = T if gamma == 1.0 else (1 - gamma**T) / (1 - gamma)
    assert weighted_potential_bound(T, gamma, lam, L, d, W) >= 0.0


def test_radius_params_validation():
    with pytest.raises(ValueError):
        RadiusParams(S=1.0, L=1.0, R=1.0, delta=1.5, d=2)
    with pytest.raises(ValueError):
        RadiusParams(S=-1.0, L=1.0, R=1.0, delta=0.1, d=2)
