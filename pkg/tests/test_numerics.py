import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftbandit.numerics import (
    DimensionMismatch,
    NotPositiveDefinite,
    logdet,
    quad_norm,
    quad_norm_many,
    spd_solve,
)


def minor_det(a: np.ndarray) -> float:
    """Cofactor-expansion determinant, independent of any factorization."""
    n = a.shape[0]
    if n == 1:
        return float(a[0, 0])
    total = 0.0
    rest = a[1:]
    for j in range(n):
        sub = np.delete(rest, j, axis=1)
        total += (-1.0) ** j * a[0, j] * minor_det(sub)
    return total


def adjugate_inverse(a: np.ndarray) -> np.ndarray:
    """Explicit inverse via the adjugate: brute-force oracle for small matrices."""
    n = a.shape[0]
    cof = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            sub = np.delete(np.delete(a, i, axis=0), j, axis=1)
            cof[i, j] = (-1.0) ** (i + j) * minor_det(sub)
    return cof.T / minor_det(a)


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    m = rng.standard_normal((n, n))
    return m.T @ m + np.eye(n)


def test_solve_identity():
    assert np.allclose(spd_solve(np.eye(2), np.array([3.0, -1.0])), [3.0, -1.0])


def test_solve_diagonal_scaling():
    assert np.allclose(spd_solve(2.0 * np.eye(2), np.array([2.0, 4.0])), [1.0, 2.0])


def test_solve_matches_adjugate_inverse():
    rng = np.random.default_rng(7)
    a = random_spd(rng, 5)
    b = rng.standard_normal(5)
    expected = adjugate_inverse(a) @ b
    got = spd_solve(a, b)
    assert np.max(np.abs(got - expected)) < 1e-9


def test_solve_residual_contract():
    rng = np.random.default_rng(8)
    for _ in range(20):
        n = int(rng.integers(1, 8))
        a = random_spd(rng, n)
        b = rng.standard_normal(n) * 10
        x = spd_solve(a, b)
        assert np.max(np.abs(a @ x - b)) <= 1e-10 * (1 + np.max(np.abs(b)))


def test_not_positive_definite_raises():
    bad = np.array([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(NotPositiveDefinite):
        spd_solve(bad, np.ones(2))
    with pytest.raises(NotPositiveDefinite):
        logdet(bad)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        spd_solve(np.eye(2), np.ones(3))
    with pytest.raises(DimensionMismatch):
        quad_norm(np.eye(2), np.ones(3))


def test_quad_norm_euclidean_cases():
    assert quad_norm(np.eye(2), np.array([3.0, 4.0])) == pytest.approx(5.0)
    assert quad_norm(4.0 * np.eye(2), np.array([2.0, 0.0])) == pytest.approx(1.0)


def test_quad_norm_matches_brute_force():
    rng = np.random.default_rng(9)
    a = random_spd(rng, 4)
    x = rng.standard_normal(4)
    expected = np.sqrt(x @ adjugate_inverse(a) @ x)
    assert abs(quad_norm(a, x) - expected) < 1e-10


def test_quad_norm_many_matches_single():
    rng = np.random.default_rng(10)
    a = random_spd(rng, 3)
    xs = rng.standard_normal((6, 3))
    batch = quad_norm_many(a, xs)
    for i in range(6):
        assert batch[i] == pytest.approx(quad_norm(a, xs[i]), abs=1e-12)


def test_logdet_cases():
    assert logdet(np.eye(3)) == pytest.approx(0.0)
    assert logdet(np.diag([2.0, 3.0])) == pytest.approx(np.log(6.0))
    rng = np.random.default_rng(11)
    a = random_spd(rng, 4)
    assert logdet(a) == pytest.approx(np.log(minor_det(a)), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=0, max_value=2**31 - 1),
    st.floats(min_value=-7.0, max_value=7.0, allow_nan=False),
)
def test_quad_norm_homogeneous_and_roundtrip(n, seed, c):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n))
    a = m.T @ m + 1e-8 * np.eye(n)  # Cholesky must succeed down to eps = 1e-8
    x = rng.standard_normal(n)
    assert quad_norm(a, c * x) == pytest.approx(abs(c) * quad_norm(a, x), rel=1e-9, abs=1e-9)
    b = rng.standard_normal(n)
    sol = spd_solve(a, b)
    assert np.max(np.abs(a @ sol - b)) <= 1e-7 * (1 + np.max(np.abs(b)))
    assert quad_norm(a, x) ** 2 + quad_norm(a, b) ** 2 >= 0.0
