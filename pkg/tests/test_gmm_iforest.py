import math

import numpy as np
import pytest

from flowbench.detect import GMM, IsolationForest, average_path_length, quickshiftpp_mode_count
from flowbench.detect.gmm import fit_em, kmeans_pp_centers
from flowbench.exceptions import InsufficientData


def roundoff(history):
    return 1e-12 * max(1.0, max(abs(h) for h in history))


class TestGMM:
    def test_single_component_is_gaussian_mle(self, rng):
        X = rng.normal(size=(200, 3)) @ rng.normal(size=(3, 3))
        m = GMM(n_components=1).fit(X)
        np.testing.assert_allclose(m.means_[0], X.mean(axis=0), atol=1e-12)
        cov = np.cov(X.T, bias=True) + 1e-6 * np.eye(3)
        np.testing.assert_allclose(m.covariances_[0], cov, atol=1e-10)
        assert m.weights_[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(20))
    def test_log_likelihood_non_decreasing(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(1, 6))
        X = np.vstack([rng.normal(size=(int(rng.integers(30, 120)), d)) * rng.uniform(0.3, 2) + rng.normal(scale=4, size=d)
                       for _ in range(int(rng.integers(1, 5)))])
        for k in (1, 2, 4):
            history = fit_em(X, k, rng=np.random.default_rng(seed))[3]
            assert np.all(np.diff(history) >= -roundoff(history))

    def test_two_blobs_responsibilities(self, blobs):
        m = GMM(n_components=2, random_state=3).fit(blobs)
        r = m.responsibilities(blobs)
        first = r[:60].argmax(axis=1)
        assert len(set(first)) == 1
        own = r[:60, first[0]].tolist() + r[60:, 1 - first[0]].tolist()
        assert min(own) >= 0.99

    def test_score_is_mixture_log_density(self, blobs):
        from scipy.stats import multivariate_normal
        m = GMM(n_components=2).fit(blobs)
        Q = blobs[::17] + 0.3
        dens = sum(w * multivariate_normal(mu, c).pdf(Q) for w, mu, c in zip(m.weights_, m.means_, m.covariances_))
        np.testing.assert_allclose(m.score_samples(Q), np.log(dens), rtol=1e-10)

    def test_stops_within_max_iter(self, rng):
        X = rng.normal(size=(100, 2))
        assert len(GMM(n_components=3, max_iter=5).fit(X).history_) <= 5

    def test_default_uses_mode_count(self, blobs):
        assert GMM().fit(blobs).n_components_ == quickshiftpp_mode_count(blobs)

    def test_kmeanspp_picks_distinct_points(self, rng):
        X = rng.normal(size=(50, 2))
        c = kmeans_pp_centers(X, 5, np.random.default_rng(0))
        assert len({tuple(r) for r in c}) == 5


class TestQuickshift:
    def test_single_blob_clamped_to_two(self, rng):
        assert quickshiftpp_mode_count(rng.normal(size=(300, 2))) == 2

    def test_two_blobs(self, rng):
        X = np.vstack([rng.normal(size=(150, 2)), rng.normal(size=(150, 2)) + 20.0])
        assert quickshiftpp_mode_count(X) == 2

    @pytest.mark.parametrize("seed", range(20))
    def test_tail_fragments_are_not_modes(self, seed):
        rng = np.random.default_rng(seed)
        assert quickshiftpp_mode_count(np.vstack([rng.normal(size=(150, 2)), rng.normal(size=(150, 2)) + 20.0])) == 2
        four = np.vstack([rng.normal(size=(100, 2)) + c for c in [(0, 0), (30, 0), (0, 30), (30, 30)]])
        assert quickshiftpp_mode_count(four) == 4
        assert quickshiftpp_mode_count(rng.normal(size=(400, 8))) == 2

    def test_duplicates_only(self):
        assert quickshiftpp_mode_count(np.ones((40, 3))) == 2

    def test_many_blobs(self, rng):
        centers = np.array([[0, 0], [30, 0], [0, 30], [30, 30], [60, 60]], dtype=float)
        X = np.vstack([rng.normal(size=(80, 2)) + c for c in centers])
        assert quickshiftpp_mode_count(X) == 5

    def test_clamped_at_thirty(self):
        X = np.array([[40.0 * i, 0.0] for i in range(40) for _ in range(4)])
        X += np.random.default_rng(1).normal(scale=0.01, size=X.shape)
        assert quickshiftpp_mode_count(X, knn_k=3) == 30

    def test_too_few_points(self):
        with pytest.raises(InsufficientData):
            quickshiftpp_mode_count(np.zeros((2, 2)))


class TestIsolationForest:
    def test_c_of_two(self):
        assert float(average_path_length(2)) == pytest.approx(1.0, abs=1e-14)

    @pytest.mark.parametrize("n", [3, 10, 256, 1000])
    def test_c_harmonic_oracle(self, n):
        harmonic = sum(1.0 / i for i in range(1, n))
        assert float(average_path_length(n)) == pytest.approx(2 * harmonic - 2 * (n - 1) / n, rel=1e-12)

    def test_c_degenerate(self):
        assert float(average_path_length(1)) == 0.0

    def test_planted_outlier_majority(self):
        wins = 0
        for seed in range(1000):
            rng = np.random.default_rng(seed)
            X = np.vstack([rng.normal(size=(30, 2)) * 0.5, [[6.0, 6.0]]])
            m = IsolationForest(n_trees=10, random_state=seed).fit(X)
            s = m.score_samples(np.vstack([X[:-1].mean(axis=0), X[-1]]))
            wins += s[1] < s[0]
        assert wins > 500

    def test_deterministic(self, rng):
        X = rng.normal(size=(100, 4))
        a = IsolationForest(n_trees=20, random_state=5).fit(X).score_samples(X)
        b = IsolationForest(n_trees=20, random_state=5).fit(X).score_samples(X)
        np.testing.assert_array_equal(a, b)

    def test_smaller_forest_is_prefix(self, rng):
        X = rng.normal(size=(300, 3))
        big = IsolationForest(n_trees=50, random_state=2).fit(X)
        small = IsolationForest(n_trees=20, random_state=2).fit(X)
        np.testing.assert_array_equal(big.truncated(20).score_samples(X), small.score_samples(X))

    def test_height_limit_and_subsample(self, rng):
        X = rng.normal(size=(1000, 2))
        m = IsolationForest(n_trees=5).fit(X)
        assert m.psi_ == 256
        limit = math.ceil(math.log2(256))
        for t in m.trees_:
            depth = np.zeros(len(t.feature))
            for i, f in enumerate(t.feature):
                if f >= 0:
                    depth[t.left[i]] = depth[t.right[i]] = depth[i] + 1
            assert depth.max() <= limit
            assert t.size[t.feature < 0].sum() == 256

    def test_anomaly_score_range(self, rng):
        X = rng.normal(size=(200, 3))
        a = IsolationForest(n_trees=30).fit(X).anomaly_score(np.vstack([X, [[50, 50, 50]]]))
        assert np.all((a > 0) & (a <= 1)) and a[-1] == a.max()
