"""Stationary statistics: autocorrelation, patch covariance, eigensolver,
LDA directions and whitening transforms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldcf.errors import (
    ConfigError,
    DimensionMismatch,
    NonPositiveEigenvalue,
    NotSymmetric,
)
from ldcf.linstats import (
    LdaInputs,
    ensure_psd,
    estimate_autocorr_brute,
    estimate_autocorr_fft,
    extract_local_sigma,
    extract_rect_sigma,
    floor_eigenvalues,
    lda_direction,
    lda_directions,
    load_autocorr,
    patch_covariance,
    save_autocorr,
    stationary_rect_cov,
    sym_eig,
    transform_features,
    transform_matrix,
    window_covariance,
)

from conftest import make_stack


def random_stacks(seed, n=3, h=10, w=10, channels=1):
    r = np.random.Generator(np.random.Philox(seed))
    return [make_stack(r.standard_normal((channels, h, w))) for _ in range(n)]


class TestAutocorrEstimators:
    def test_fft_equals_brute(self, rng):
        stacks = random_stacks(11, n=4, h=12, w=9, channels=2)
        a = estimate_autocorr_fft(stacks, 3)
        b = estimate_autocorr_brute(stacks, 3)
        np.testing.assert_allclose(a.grids, b.grids, atol=1e-10)
        np.testing.assert_array_equal(a.counts, b.counts)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31), radius=st.integers(1, 4))
    def test_fft_equals_brute_property(self, seed, radius):
        stacks = random_stacks(seed, n=2, h=9, w=11)
        a = estimate_autocorr_fft(stacks, radius)
        b = estimate_autocorr_brute(stacks, radius)
        np.testing.assert_allclose(a.grids, b.grids, atol=1e-10)

    def test_central_value_is_variance(self):
        stacks = random_stacks(5, n=6, h=16, w=16)
        ac = estimate_autocorr_fft(stacks, 2)
        # C(0,0) averages per-plane centered squares over the corpus
        num = sum(((s.planes[0] - s.planes[0].mean()) ** 2).sum() for s in stacks)
        den = sum(s.planes[0].size for s in stacks)
        assert ac.grids[0, 2, 2] == pytest.approx(num / den, rel=1e-12)

    def test_point_symmetry(self):
        ac = estimate_autocorr_fft(random_stacks(7), 3)
        np.testing.assert_allclose(ac.grids, ac.grids[:, ::-1, ::-1], atol=1e-14)

    def test_white_noise_near_delta(self):
        stacks = random_stacks(3, n=40, h=32, w=32)
        ac = estimate_autocorr_fft(stacks, 2)
        g = ac.grids[0]
        off_center = np.abs(g[np.abs(g) < np.abs(g[2, 2])])
        assert np.abs(g[2, 2] - 1.0) < 0.05
        assert off_center.max() < 0.05

    def test_radius_too_large(self):
        from ldcf.errors import PlaneTooSmall

        with pytest.raises(PlaneTooSmall):
            estimate_autocorr_fft(random_stacks(1, h=4, w=4), 4)

    def test_roundtrip_text(self, tmp_path):
        ac = estimate_autocorr_fft(random_stacks(9, channels=3), 2)
        save_autocorr(ac, tmp_path / "ac.txt")
        back = load_autocorr(tmp_path / "ac.txt")
        np.testing.assert_array_equal(back.grids, ac.grids)
        np.testing.assert_array_equal(back.counts, ac.counts)
        assert back.labels == ac.labels


class TestPatchCovariance:
    def test_toeplitz_lookup(self):
        ac = estimate_autocorr_fft(random_stacks(13), 2)
        sigma = patch_covariance(ac, "ch0", 3)
        assert sigma.shape == (9, 9)
        g = ac.grids[0]
        # entry for pixel pair p=(y1,x1), q=(y2,x2) is C(x2-x1, y2-y1)
        for p in range(9):
            for q in range(9):
                y1, x1 = divmod(p, 3)
                y2, x2 = divmod(q, 3)
                assert sigma[p, q] == pytest.approx(
                    g[2 + (y2 - y1), 2 + (x2 - x1)], abs=1e-14
                )

    def test_symmetric_psd_after_repair(self):
        ac = estimate_autocorr_fft(random_stacks(17, n=2, h=8, w=8), 3)
        sigma = ensure_psd(patch_covariance(ac, "ch0", 3))
        np.testing.assert_allclose(sigma, sigma.T, atol=1e-12)
        assert np.linalg.eigvalsh(sigma).min() >= -1e-10

    def test_even_patch_size_rejected(self):
        ac = estimate_autocorr_fft(random_stacks(17, n=2, h=8, w=8), 3)
        with pytest.raises(ConfigError):
            patch_covariance(ac, "ch0", 4)

    def test_rect_matches_square(self):
        ac = estimate_autocorr_fft(random_stacks(19), 2)
        np.testing.assert_array_equal(
            stationary_rect_cov(ac.grids[0], 3, 3), patch_covariance(ac, "ch0", 3)
        )

    def test_ar1_texture_oracle(self):
        # separable lag-0.9 texture: model covariance vs sampled patches
        r = np.random.Generator(np.random.Philox(77))
        rho, n, side = 0.9, 60, 48
        scale = np.sqrt(1 - rho * rho)
        imgs = []
        for _ in range(n):
            z = r.standard_normal((side, side))
            for i in range(1, side):
                z[i] = rho * z[i - 1] + scale * z[i]
            for j in range(1, side):
                z[:, j] = rho * z[:, j - 1] + scale * z[:, j]
            imgs.append(make_stack(z))
        sigma = patch_covariance(estimate_autocorr_fft(imgs, 2), "ch0", 3)
        # direct estimate of the same quantity: patches centered by
        # their source plane's mean, averaged outer products
        means = [s.planes[0].mean() for s in imgs]
        patches = []
        for _ in range(20000):
            k = r.integers(0, n)
            y, x = r.integers(0, side - 2, size=2)
            patches.append(
                imgs[k].planes[0, y : y + 3, x : x + 3].ravel() - means[k]
            )
        p = np.array(patches)
        direct = p.T @ p / len(p)
        rel = np.linalg.norm(sigma - direct) / np.linalg.norm(direct)
        assert rel < 0.05


class TestWindowCovariance:
    def test_matches_numpy_cov(self, rng):
        x = rng.standard_normal((50, 20))
        wc = window_covariance(x, 4, 5)
        np.testing.assert_allclose(wc.sigma, np.cov(x.T, ddof=1), atol=1e-12)
        np.testing.assert_allclose(wc.mean, x.mean(axis=0), atol=1e-15)

    def test_rect_extraction_row_major(self, rng):
        x = rng.standard_normal((40, 20))
        wc = window_covariance(x, 4, 5)
        # window pixel (row, col) flattens to row * width + col
        idx = [1 * 5 + 2, 1 * 5 + 3, 2 * 5 + 2, 2 * 5 + 3]
        np.testing.assert_array_equal(
            extract_rect_sigma(wc, (1, 2), 2, 2), wc.sigma[np.ix_(idx, idx)]
        )

    def test_local_matches_rect(self, rng):
        wc = window_covariance(rng.standard_normal((30, 36)), 6, 6)
        np.testing.assert_array_equal(
            extract_local_sigma(wc, (1, 1), 3), extract_rect_sigma(wc, (1, 1), 3, 3)
        )

    def test_patch_bounds_checked(self, rng):
        from ldcf.errors import PatchOutOfBounds

        wc = window_covariance(rng.standard_normal((10, 12)), 3, 4)
        with pytest.raises(PatchOutOfBounds):
            extract_rect_sigma(wc, (2, 0), 2, 2)

    def test_too_few_samples(self):
        from ldcf.errors import TooFewSamples

        with pytest.raises(TooFewSamples):
            window_covariance(np.ones((1, 4)))


class TestSymEig:
    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**31), d=st.integers(1, 12))
    def test_reconstruction_and_orthogonality(self, seed, d):
        r = np.random.Generator(np.random.Philox(seed))
        a = r.standard_normal((d, d))
        s = (a + a.T) / 2
        eig = sym_eig(s)
        recon = eig.q @ np.diag(eig.eigenvalues) @ eig.q.T
        scale = max(np.abs(s).max(), 1e-30)
        assert np.abs(recon - s).max() <= 1e-9 * scale
        assert np.abs(eig.q.T @ eig.q - np.eye(d)).max() <= 1e-9
        assert np.all(np.diff(eig.eigenvalues) <= 1e-12)

    def test_known_two_by_two(self):
        eig = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(eig.eigenvalues, [3.0, 1.0], atol=1e-12)

    def test_rejects_asymmetric(self):
        with pytest.raises(NotSymmetric):
            sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_sign_convention_deterministic(self, rng):
        a = rng.standard_normal((6, 6))
        s = a @ a.T
        e1, e2 = sym_eig(s), sym_eig(s.copy())
        np.testing.assert_array_equal(e1.q, e2.q)
        # largest-magnitude entry of each eigenvector is non-negative
        peak = np.argmax(np.abs(e1.q), axis=0)
        assert (e1.q[peak, np.arange(6)] >= 0).all()


class TestLda:
    def test_eps_one_is_mean_difference(self, rng):
        mu_p, mu_m = rng.standard_normal(5), rng.standard_normal(5)
        a = rng.standard_normal((5, 5))
        w = lda_direction(LdaInputs(mu_p, mu_m, a @ a.T, 1.0))
        np.testing.assert_array_equal(w, mu_p - mu_m)

    def test_diagonal_closed_form(self):
        diag = np.array([4.0, 1.0, 0.25])
        mu_p = np.array([1.0, 2.0, 3.0])
        mu_m = np.zeros(3)
        eps = 0.2
        w = lda_direction(LdaInputs(mu_p, mu_m, np.diag(diag), eps))
        expect = (mu_p - mu_m) / ((1 - eps) * diag + eps)
        np.testing.assert_allclose(w, expect, atol=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), d=st.integers(2, 10),
           eps=st.floats(0.0, 0.99))
    def test_residual_bound(self, seed, d, eps):
        r = np.random.Generator(np.random.Philox(seed))
        a = r.standard_normal((d, d))
        sigma = a @ a.T + 0.5 * np.eye(d)
        mu_p, mu_m = r.standard_normal(d), r.standard_normal(d)
        w = lda_direction(LdaInputs(mu_p, mu_m, sigma, eps))
        diff = mu_p - mu_m
        resid = ((1 - eps) * sigma + eps * np.eye(d)) @ w - diff
        assert np.linalg.norm(resid) <= 1e-9 * max(np.linalg.norm(diff), 1e-30)

    def test_batch_matches_single(self, rng):
        a = rng.standard_normal((4, 4))
        sigma = a @ a.T + np.eye(4)
        diffs = rng.standard_normal((3, 4))
        ws = lda_directions(diffs, sigma, 0.1)
        for i in range(3):
            wi = lda_directions(diffs[i], sigma, 0.1)[0]
            np.testing.assert_allclose(ws[i], wi, atol=1e-14)

    def test_eps_out_of_range(self):
        with pytest.raises(ConfigError):
            lda_directions(np.ones((1, 2)), np.eye(2), 1.5)


class TestTransforms:
    def _eig(self, rng, d=5):
        a = rng.standard_normal((d, d))
        return sym_eig(a @ a.T + 0.1 * np.eye(d))

    def test_whitened_covariance_identity(self, rng):
        d = 5
        a = rng.standard_normal((d, d))
        sigma = a @ a.T + 0.1 * np.eye(d)
        eig = sym_eig(sigma)
        for mode in ("pca_whiten", "zca_whiten"):
            m = transform_matrix(eig, mode)
            np.testing.assert_allclose(m @ sigma @ m.T, np.eye(d), atol=1e-9)

    def test_decorrelate_is_rotation(self, rng):
        eig = self._eig(rng)
        m = transform_matrix(eig, "decorrelate")
        np.testing.assert_allclose(m @ m.T, np.eye(5), atol=1e-12)

    def test_zca_symmetric(self, rng):
        m = transform_matrix(self._eig(rng), "zca_whiten")
        np.testing.assert_allclose(m, m.T, atol=1e-10)

    def test_feature_map_application(self, rng):
        eig = self._eig(rng, 4)
        x = rng.standard_normal((7, 4))
        out = transform_features(x, eig, "decorrelate")
        np.testing.assert_allclose(out, x @ eig.q, atol=1e-13)

    def test_nonpositive_eigenvalue_guard(self):
        eig = sym_eig(np.diag([1.0, 0.0]))
        with pytest.raises(NonPositiveEigenvalue):
            transform_matrix(eig, "pca_whiten")
        floored = floor_eigenvalues(eig)
        transform_matrix(floored, "pca_whiten")  # no raise after flooring

    def test_unknown_mode(self, rng):
        with pytest.raises(ConfigError):
            transform_matrix(self._eig(rng), "melt")

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionMismatch):
            transform_features(np.ones((2, 3)), self._eig(rng, 4), "decorrelate")
