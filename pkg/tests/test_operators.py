import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from unrolled_jadce.operators import (
    group_norms,
    lasso_objective,
    mixed_norm_20,
    mixed_norm_21,
    msto,
    msto_vjp,
    mutual_coherence,
    set_condition_number,
    shrink,
    spectral_norm_sq,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
matrices = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 5)), elements=finite)
thetas = st.floats(0, 5, allow_nan=False)


def test_msto_worked_example():
    out = msto(np.array([[3.0, 4.0], [0.3, 0.4], [0.0, 0.0]]), 1.0)
    np.testing.assert_allclose(out.value, [[2.4, 3.2], [0, 0], [0, 0]])
    assert out.active_rows == {0}


def test_threshold_equal_to_norm_zeroes_row():
    assert not np.any(shrink(np.array([[3.0, 4.0]]), 5.0))


def test_negative_threshold_rejected():
    with pytest.raises(ValueError):
        shrink(np.ones((2, 2)), -0.1)


@given(matrices, thetas)
def test_prox_optimality(x, theta):
    """Output beats nearby perturbations on the prox objective."""
    v = shrink(x, theta)

    def f(z):
        return 0.5 * np.sum((z - x) ** 2) + theta * np.sum(group_norms(z))

    rng = np.random.default_rng(0)
    base = f(v)
    for _ in range(5):
        assert base <= f(v + 1e-3 * rng.standard_normal(x.shape)) + 1e-12


@given(matrices, thetas)
def test_row_norms_shrink_by_theta(x, theta):
    r_in, r_out = group_norms(x), group_norms(shrink(x, theta))
    np.testing.assert_allclose(r_out, np.maximum(r_in - theta, 0.0), atol=1e-9)


@given(matrices, thetas, thetas)
def test_nonexpansive(x, theta, shift):
    y = x + shift
    assert np.linalg.norm(shrink(x, theta) - shrink(y, theta)) <= np.linalg.norm(x - y) + 1e-9


def test_batch_matches_loop(rng):
    x = rng.standard_normal((4, 6, 3))
    np.testing.assert_array_equal(shrink(x, 0.8), np.stack([shrink(a, 0.8) for a in x]))


def test_vjp_matches_finite_differences(rng):
    x = rng.standard_normal((7, 4)) * 2
    theta = 0.7
    r = group_norms(x)
    assert np.min(np.abs(r - theta)) > 1e-3
    g = rng.standard_normal(x.shape)
    gx, gt = msto_vjp(x, theta, g)
    h = 1e-6
    num_x = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        num_x[idx] = np.sum(g * (shrink(x + e, theta) - shrink(x - e, theta))) / (2 * h)
    num_t = np.sum(g * (shrink(x, theta + h) - shrink(x, theta - h))) / (2 * h)
    np.testing.assert_allclose(gx, num_x, atol=1e-7)
    assert gt == pytest.approx(num_t, abs=1e-7)


def test_mixed_norms():
    x = np.array([[3.0, 4.0], [0.0, 0.0], [1.0, 0.0]])
    assert mixed_norm_21(x) == pytest.approx(6.0)
    assert mixed_norm_20(x) == 2
    assert mixed_norm_20(np.stack([x, 0 * x])).tolist() == [2, 0]


def test_lasso_objective_value():
    s = np.eye(2)
    y = np.array([[1.0], [2.0]])
    x = np.zeros((2, 1))
    assert lasso_objective(y, s, x, 0.5) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        lasso_objective(y, s, np.zeros((3, 1)), 0.5)


def test_spectral_norm_matches_svd(rng):
    s = rng.standard_normal((5, 9))
    assert spectral_norm_sq(s) == pytest.approx(np.linalg.svd(s, compute_uv=False)[0] ** 2)


def test_mutual_coherence_orthonormal_and_repeated():
    assert mutual_coherence(np.eye(3)) == 0.0
    s = np.array([[1.0, 1.0], [0.0, 0.0]])
    assert mutual_coherence(s) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        mutual_coherence(np.array([[2.0, 0.0], [0.0, 1.0]]))


@pytest.mark.parametrize("kappa", [1.0, 2.0, 15.0])
def test_set_condition_number(rng, kappa):
    a = rng.standard_normal((6, 10)) + 1j * rng.standard_normal((6, 10))
    p = set_condition_number(a, kappa)
    sv = np.linalg.svd(p.pre_normalization, compute_uv=False)
    assert sv[0] / sv[-1] == pytest.approx(kappa, rel=1e-9)
    np.testing.assert_allclose(np.linalg.norm(p.entries, axis=0), 1.0, atol=1e-12)


def test_set_condition_number_rejects_bad_input(rng):
    with pytest.raises(ValueError):
        set_condition_number(rng.standard_normal((3, 5)), 0.5)
    with pytest.raises(ValueError):
        set_condition_number(np.ones((3, 5)), 2.0)
