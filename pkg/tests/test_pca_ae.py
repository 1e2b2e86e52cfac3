import numpy as np
import pytest

from flowbench.detect import PCA, Autoencoder, dim_grid, pca_mle_dim
from flowbench.detect.autoencoder import MLP, hidden_size, layer_sizes
from flowbench.exceptions import NonFiniteLoss


class TestPCA:
    def test_affine_subspace_reconstructs_exactly(self, rng):
        basis = rng.normal(size=(2, 6))
        X = rng.normal(size=(100, 2)) @ basis + rng.normal(size=6)
        m = PCA(n_components=2).fit(X)
        assert np.abs(m.score_samples(X)).max() < 1e-9

    def test_mean_score_is_trailing_eigenvalue_sum(self, rng):
        X = rng.normal(size=(200, 5)) @ rng.normal(size=(5, 5))
        for k in range(1, 5):
            m = PCA(n_components=k).fit(X)
            want = -np.sort(np.linalg.eigvalsh(np.cov(X.T, bias=True)))[::-1][k:].sum()
            assert m.score_samples(X).mean() == pytest.approx(want, rel=1e-6)

    def test_sign_convention(self, rng):
        m = PCA(n_components=3).fit(rng.normal(size=(50, 4)))
        for axis in m.components_:
            assert axis[np.argmax(np.abs(axis))] > 0

    def test_dim_grid(self):
        assert dim_grid(10) == [1, 2, 3, 4, 5, 6, 7, 8, 9, 9]
        assert dim_grid(2) == [1] * 10

    @pytest.mark.parametrize("k", [0, 4])
    def test_dim_out_of_range(self, rng, k):
        with pytest.raises(ValueError):
            PCA(n_components=k).fit(rng.normal(size=(20, 4)))

    def test_default_dimension_uses_mle(self, rng):
        X = rng.normal(size=(300, 6)) * [5, 4, 0.01, 0.01, 0.01, 0.01]
        assert PCA().fit(X).n_components_ == 2


class TestPcaMle:
    def test_two_strong_directions(self):
        assert pca_mle_dim([10, 10] + [1e-8] * 8, 1000) == 2

    def test_isotropic_is_one(self):
        assert pca_mle_dim([1, 1, 1, 1], 100) == 1

    @pytest.mark.parametrize("seed", range(40))
    def test_matches_sklearn_mle(self, seed):
        from sklearn.decomposition import PCA as SkPCA
        rng = np.random.default_rng(seed)
        d = int(rng.integers(3, 9))
        n = int(rng.integers(d + 20, 300))
        X = rng.normal(size=(n, d)) * rng.uniform(0.05, 3, size=d) @ np.linalg.qr(rng.normal(size=(d, d)))[0]
        spectrum = SkPCA(svd_solver="full").fit(X).explained_variance_
        chosen = SkPCA(n_components="mle", svd_solver="full").fit(X).n_components_
        assert pca_mle_dim(spectrum, n) == chosen

    @pytest.mark.parametrize("seed", range(10))
    def test_always_in_range(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 12))
        spectrum = np.sort(rng.exponential(size=d) ** 3)[::-1]
        assert 1 <= pca_mle_dim(spectrum, int(rng.integers(2, 500))) <= d - 1


class TestAutoencoder:
    def test_hidden_size(self):
        assert hidden_size(31, 30) == 30
        assert hidden_size(31, 4) == 8
        assert layer_sizes(10, 3) == [10, 6, 3, 6, 10]

    def test_gradient_matches_finite_differences(self, rng):
        net = MLP(layer_sizes(4, 2))
        net.init_he_uniform(rng)
        # keep pre-activations away from the LeakyReLU kink
        net.flat += rng.normal(scale=0.1, size=net.flat.size)
        X = rng.normal(size=(6, 4))
        _, grad = net.loss_and_grad(X)
        eps = 1e-5
        numeric = np.empty_like(grad)
        for i in range(net.flat.size):
            keep = net.flat[i]
            net.flat[i] = keep + eps
            up = net.loss(X)
            net.flat[i] = keep - eps
            down = net.loss(X)
            net.flat[i] = keep
            numeric[i] = (up - down) / (2 * eps)
        rel = np.abs(grad - numeric) / np.maximum(np.abs(grad) + np.abs(numeric), 1e-8)
        assert rel.max() <= 1e-4

    def test_training_reduces_loss(self, rng):
        X = rng.normal(size=(120, 6)) @ rng.normal(size=(6, 6))
        m = Autoencoder(latent_dim=3, random_state=1).fit(X)
        assert len(m.loss_history_) == 101
        assert m.loss_history_[-1] < m.loss_history_[0]

    def test_default_latent(self, rng):
        assert Autoencoder(epochs=1).fit(rng.normal(size=(40, 31))).latent_dim_ == 16

    def test_deterministic_parameters(self, rng):
        X = rng.normal(size=(60, 5))
        a = Autoencoder(epochs=5, random_state=3).fit(X)
        b = Autoencoder(epochs=5, random_state=3).fit(X)
        np.testing.assert_array_equal(a.net_.flat, b.net_.flat)

    def test_non_finite_loss_aborts(self, rng):
        with pytest.raises(NonFiniteLoss):
            Autoencoder(epochs=50, lr=1e200).fit(rng.normal(size=(40, 4)))
