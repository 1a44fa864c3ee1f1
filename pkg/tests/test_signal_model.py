import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from unrolled_jadce import signal_model as sm
from unrolled_jadce.metrics import snr_empirical


@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 4), st.integers(0, 2**32))
def test_lifting_preserves_products(l, n, m, seed):
    rng = np.random.default_rng(seed)
    s = sm.complex_normal(rng, (l, n))
    x = sm.complex_normal(rng, (n, m))
    np.testing.assert_allclose(sm.lift_matrix(s) @ sm.lift_rows(x), sm.lift_rows(s @ x),
                               atol=1e-12)
    np.testing.assert_array_equal(sm.unlift_rows(sm.lift_rows(x)), x)
    np.testing.assert_array_equal(sm.unlift_matrix(sm.lift_matrix(s)), s)


def test_lifted_layout():
    s = np.array([[1 + 2j]])
    np.testing.assert_array_equal(sm.lift_matrix(s), [[1, -2], [2, 1]])


def test_lift_to_real_consistent():
    p = sm.gen_preamble("gaussian", 4, 8, seed=1)
    inst = sm.make_instance(p, 3, 0.5, 10.0, seed=2)
    sys_ = sm.lift_to_real(inst)
    np.testing.assert_allclose(sys_.s_tilde @ sys_.x_tilde + sys_.z_tilde, sys_.y_tilde,
                               atol=1e-12)
    assert (sys_.n_complex, sys_.l_complex) == (8, 4)


@pytest.mark.parametrize("kind", ["gaussian", "binary", "zadoff_chu"])
def test_preambles_unit_norm_and_deterministic(kind):
    a = sm.gen_preamble(kind, 20, 40, seed=3)
    b = sm.gen_preamble(kind, 20, 40, seed=3)
    np.testing.assert_array_equal(a.entries, b.entries)
    np.testing.assert_allclose(np.linalg.norm(a.entries, axis=0), 1.0, atol=1e-12)
    assert a.shape == (20, 40) and a.lifted.shape == (40, 80)


def test_binary_entries_are_signs():
    p = sm.gen_preamble("binary", 16, 30, seed=0)
    np.testing.assert_allclose(np.abs(p.entries), 1 / 4)


def test_zadoff_chu_structure():
    cols = sm.zadoff_chu_columns(7, 8)
    # L=7 is prime: root 1 covers shifts 0..6, then root 2 shift 0
    k = np.arange(7)
    np.testing.assert_allclose(cols[:, 0], np.exp(-1j * np.pi * k * (k + 1) / 7))
    np.testing.assert_allclose(cols[:, 1], np.roll(cols[:, 0], -1))
    np.testing.assert_allclose(cols[:, 7], np.exp(-2j * np.pi * k * (k + 1) / 7))
    np.testing.assert_allclose(np.abs(cols), 1.0)
    with pytest.raises(ValueError):
        sm.zadoff_chu_columns(3, 7)


def test_preamble_validation():
    with pytest.raises(ValueError):
        sm.gen_preamble("gaussian", 40, 20, seed=0)
    assert sm.gen_preamble("gaussian", 40, 20, seed=0, allow_underloaded=True).shape == (40, 20)
    with pytest.raises(ValueError):
        sm.gen_preamble("chirp", 4, 8, seed=0)
    with pytest.raises(ValueError):
        sm.PreambleMatrix(np.ones((2, 3)), kind="custom")


def test_ill_conditioned_preamble():
    p = sm.gen_ill_conditioned(20, 40, 15.0, seed=0)
    sv = np.linalg.svd(p.pre_normalization, compute_uv=False)
    assert sv[0] / sv[-1] == pytest.approx(15.0)


def test_signal_activity_and_support():
    sig = sm.gen_signal(200, 4, 0.3, seed=0)
    assert set(np.unique(sig.activity)) <= {0, 1}
    assert set(sig.support.tolist()) == set(np.flatnonzero(sig.activity).tolist())
    np.testing.assert_array_equal(sig.entries[sig.activity == 0], 0)
    assert sm.gen_signal(10, 2, 0.0, seed=1).activity.sum() == 0
    assert sm.gen_signal(10, 2, 1.0, seed=1).activity.sum() == 10
    with pytest.raises(ValueError):
        sm.gen_signal(10, 2, 1.5, seed=1)


@given(st.floats(-20, 40), st.integers(0, 2**32))
def test_noise_hits_snr(snr, seed):
    clean = sm.complex_normal(np.random.default_rng(seed), (5, 3))
    assert snr_empirical(clean, sm.gen_noise_for_snr(clean, snr, seed)) == pytest.approx(
        snr, abs=1e-9)


def test_noise_edge_cases():
    assert not np.any(sm.gen_noise_for_snr(np.ones((2, 2)), np.inf, 0))
    with pytest.raises(ValueError):
        sm.gen_noise_for_snr(np.zeros((2, 2)), 10.0, 0)


def test_silent_instance_uses_reference_power():
    p = sm.gen_preamble("gaussian", 4, 8, seed=0)
    inst = sm.make_instance(p, 3, 0.0, 10.0, seed=0)
    assert not np.any(inst.signal.entries)
    assert not np.any(inst.noise)
    seed = next(s for s in range(500)
                if not sm.make_instance(p, 3, 0.05, 10.0, s).signal.activity.any())
    inst = sm.make_instance(p, 3, 0.05, 10.0, seed)
    power = np.sum(np.abs(inst.noise) ** 2)
    assert power == pytest.approx(0.05 * 8 * 3 / 10.0)


def test_draw_batch_calibrated():
    p = sm.gen_preamble("gaussian", 6, 12, seed=0)
    x, y = sm.draw_batch(p, 4, 0.5, 12.0, 32, np.random.default_rng(0))
    assert x.shape == (32, 24, 4) and y.shape == (32, 12, 4)
    clean = p.lifted @ x
    for c, z in zip(clean, y - clean):
        if np.any(c):
            assert snr_empirical(c, z) == pytest.approx(12.0, abs=1e-9)


def test_dataset_roundtrip_is_byte_identical(tmp_path):
    cfg = sm.DatasetConfig(p_train=4, n_test=3, seed=7)
    a = sm.synth_dataset(cfg, tmp_path / "a")
    sm.synth_dataset(cfg, tmp_path / "b")
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    back = sm.load_dataset(tmp_path / "a")
    np.testing.assert_array_equal(back.test.y, a.test.y)
    np.testing.assert_array_equal(back.preamble.entries, a.preamble.entries)
    assert back.config == cfg and back.train.seeds == a.train.seeds


def test_dataset_config_validation():
    with pytest.raises(ValueError):
        sm.synth_dataset(sm.DatasetConfig(l=40, n=40))
    with pytest.raises(ValueError):
        sm.synth_dataset(sm.DatasetConfig(preamble_kind="binary", condition_number=3.0))
