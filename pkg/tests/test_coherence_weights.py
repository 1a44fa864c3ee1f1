import numpy as np
import pytest

from unrolled_jadce import coherence_weights as cw
from unrolled_jadce import signal_model as sm
from unrolled_jadce.operators import mutual_coherence


@pytest.fixture(scope="module")
def s():
    return sm.gen_preamble("gaussian", 8, 12, seed=4).lifted


def kkt_weight(s):
    g = np.linalg.pinv(s @ s.T) @ s
    return g / np.sum(s * g, axis=0)


def test_pgd_matches_kkt_oracle(s):
    out = cw.pgd_weight(s)
    assert out.converged
    assert out.constraint_violation < 1e-10
    oracle = kkt_weight(s)
    assert out.objective == pytest.approx(cw.frobenius_objective(oracle, s), abs=1e-6)
    # objective error is quadratic in the weight error, so W itself is looser
    np.testing.assert_allclose(out.w, oracle, atol=1e-3)


def test_projection_is_feasible_and_idempotent(s, rng):
    w = cw.project_columns(rng.standard_normal(s.shape), s)
    assert cw.constraint_violation(w, s) < 1e-12
    np.testing.assert_allclose(cw.project_columns(w, s), w, atol=1e-14)


def test_minimax_certifies_smaller_coherence(s):
    lp = cw.minimax_weight(s)
    pgd = cw.pgd_weight(s)
    assert lp.constraint_violation < 1e-8
    assert lp.mu_tilde_estimate <= pgd.mu_tilde_estimate + 1e-9
    # W = S is feasible, so the optimum cannot exceed the plain coherence
    assert lp.mu_tilde_estimate <= mutual_coherence(s) + 1e-9


def test_orthonormal_columns_have_zero_coherence():
    s = np.eye(4)[:, :3]
    assert cw.generalized_coherence(cw.pgd_weight(s).w, s) == pytest.approx(0.0, abs=1e-12)


def test_coincident_columns_warn():
    s = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.warns(UserWarning):
        cw.generalized_coherence(s, s)


def test_generalized_coherence_rejects_infeasible(s):
    with pytest.raises(ValueError):
        cw.generalized_coherence(2 * s, s)
    with pytest.raises(ValueError):
        cw.generalized_coherence(s[:, :3], s)


def test_unnormalized_input_rejected():
    with pytest.raises(ValueError):
        cw.pgd_weight(np.array([[2.0, 0.0], [0.0, 1.0]]))


def test_weight_persistence_and_cache(s, tmp_path):
    first = cw.cached_weight(s, "pgd", root=tmp_path)
    assert (tmp_path / f"weight-pgd-{cw.matrix_key(s)}" / "manifest.json").exists()
    loaded = cw.load_weight(tmp_path / f"weight-pgd-{cw.matrix_key(s)}")
    np.testing.assert_array_equal(loaded.w, first.w)
    assert loaded.mu_tilde_estimate == first.mu_tilde_estimate
    assert cw.cached_weight(s, "pgd") is first
