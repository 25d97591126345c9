import math

import numpy as np
import pytest

from driftbandit.design import DiscountedDesign, RadiusParams, linear_radius
from driftbandit.diagnostics import (
    check_logdet_bound,
    check_partial_trace_bound,
    check_potential_bound,
    design_logdet_bound,
    drift_error_bound,
    linear_coverage_rate,
    scb_coverage_rate,
)
from driftbandit.numerics import DimensionMismatch, quad_norm


def make_design(xs, gamma=0.9, lam=2.0):
    design = DiscountedDesign(xs.shape[1], gamma, lam)
    for x in xs:
        design.update(x, 0.0)
    return design


PARAMS = RadiusParams(S=1.0, L=1.0, R=1.0, delta=0.1, d=2)


def test_constant_path_reduces_to_radius_term():
    rng = np.random.default_rng(0)
    xs = rng.standard_normal((6, 2)) * 0.5
    design = make_design(xs)
    path = np.tile([0.3, -0.4], (7, 1))
    x = np.array([1.0, 0.5])
    expected = linear_radius(PARAMS, design.lam, design.weight_sum) * quad_norm(design.V, x)
    assert drift_error_bound(path, design, x, PARAMS) == pytest.approx(expected, abs=1e-12)


def test_single_jump_bias_term():
    gamma, lam = 0.8, 2.0
    xs = np.zeros((5, 2))
    design = make_design(xs, gamma=gamma, lam=lam)
    eps = 0.25
    jump_at = 3  # theta_3 -> theta_4 differs
    path = np.zeros((6, 2))
    path[jump_at:, 0] = eps
    x = np.array([0.0, 1.0])
    # sum_{s<=p} gamma^(n-s) with n = 5, p = 3
    cum = sum(gamma ** (5 - s) for s in range(1, jump_at + 1))
    expected_bias = PARAMS.L**2 * math.sqrt(2 / lam) * math.sqrt(cum) * eps
    radius_term = linear_radius(PARAMS, lam, design.weight_sum) * quad_norm(design.V, x)
    got = drift_error_bound(path, design, x, PARAMS)
    assert got == pytest.approx(expected_bias + radius_term, abs=1e-12)


def test_smaller_gamma_shrinks_bias_term():
    rng = np.random.default_rng(1)
    xs = rng.standard_normal((8, 2)) * 0.4
    path = np.zeros((9, 2))
    path[:, 0] = np.linspace(0.0, 1.0, 9)  # steady drift
    x = np.array([0.7, 0.7])
    biases = []
    for gamma in (0.5, 0.95):
        design = make_design(xs, gamma=gamma)
        radius_term = linear_radius(PARAMS, design.lam, design.weight_sum) * quad_norm(design.V, x)
        biases.append(drift_error_bound(path, design, x, PARAMS) - radius_term)
    assert biases[0] < biases[1]


def test_drift_error_bound_path_length_check():
    design = make_design(np.zeros((3, 2)))
    with pytest.raises(DimensionMismatch):
        drift_error_bound(np.zeros((3, 2)), design, np.ones(2), PARAMS)


def test_logdet_bound_empty_design_equality():
    design = DiscountedDesign(3, 0.9, 1.5)
    value, cap = design_logdet_bound(design, 1.0)
    assert value == pytest.approx(3 * math.log(1.5))
    assert cap == pytest.approx(3 * math.log(1.5))


def test_logdet_bound_single_aligned_arm_equality():
    lam, L = 0.7, 1.3
    design = DiscountedDesign(1, 1.0, lam)
    design.update(np.array([L]), 0.0)
    value, cap = design_logdet_bound(design, L)
    assert value == pytest.approx(math.log(lam + L**2))
    assert cap == pytest.approx(math.log(lam + L**2))


def test_logdet_bound_random_updates():
    rng = np.random.default_rng(2)
    design = DiscountedDesign(3, 0.9, 1.0)
    for _ in range(40):
        x = rng.standard_normal(3)
        x /= max(1.0, np.linalg.norm(x))
        design.update(x, 0.0)
        value, cap = design_logdet_bound(design, 1.0)
        assert value <= cap + 1e-9


def test_bound_suites_quick():
    assert check_potential_bound(40, seed=11).passed
    assert check_partial_trace_bound(40, seed=12).passed
    assert check_logdet_bound(40, seed=13).passed


def test_linear_coverage_quick():
    rate = linear_coverage_rate(n_runs=60, T=200, seed=21)
    assert rate >= 0.93


def test_scb_coverage_full():
    # drifting logistic runs with the known path: curvature-norm error bound
    rate = scb_coverage_rate(n_runs=500, T=120, delta=0.05, seed=5)
    assert rate >= 0.93
