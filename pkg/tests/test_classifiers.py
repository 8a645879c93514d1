import warnings

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import ConvergenceWarning
from sklearn.naive_bayes import GaussianNB
from sklearn.preprocessing import StandardScaler

from csae.classifiers import (
    GaussianNaiveBayes,
    KNearestNeighbors,
    RbfSvm,
    Standardizer,
    gnb_fit,
    gnb_predict,
    knn_predict,
    standardize,
    svm_fit,
    svm_kkt_violation,
    svm_predict,
)
from csae.classifiers.pipeline import extract_latent, pipeline_classify, raw_pixel_classify
from csae.data import LatentDataset
from csae.errors import ConfigError, EmptyDatasetError, TensorShapeError
from csae.utils import get_output_path, load_classifier

from conftest import synthetic_raw


def _blobs(n_per_class, centers, scale=0.3, seed=0):
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.normal(c, scale, size=(n_per_class, len(c))) for c in centers])
    y = np.repeat(np.arange(len(centers)), n_per_class)
    return X, y


def _brute_force_knn(train_x, train_y, query, k):
    out = []
    for q in query:
        d = np.sum((train_x - q) ** 2, axis=1)
        order = np.lexsort((np.arange(len(d)), d))[:k]
        labels = train_y[order]
        counts = {label: np.sum(labels == label) for label in labels}
        top = max(counts.values())
        out.append(next(label for label in labels if counts[label] == top))
    return np.array(out)


@pytest.mark.unit
class TestKnn:
    def test_majority_of_three(self):
        train = LatentDataset(np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 10.0]]), np.array([0, 0, 1]))
        assert knn_predict(train, np.array([[0.4, 0.0]]), k=3).tolist() == [0]
        assert knn_predict(train, np.array([[6.0, 6.0]]), k=1).tolist() == [1]

    def test_vote_tie_goes_to_nearest_member(self):
        train = LatentDataset(np.array([[0.0], [1.0], [3.0], [4.0]]), np.array([1, 0, 2, 3]))
        # k=2 around 0.4: labels 1 (d=0.4) and 0 (d=0.6) tie at one vote each
        assert knn_predict(train, np.array([[0.4]]), k=2).tolist() == [1]

    def test_distance_tie_goes_to_lower_index(self):
        train = LatentDataset(np.array([[-1.0], [1.0]]), np.array([5, 2]))
        assert knn_predict(train, np.array([[0.0]]), k=1).tolist() == [5]

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_exhaustive_scan(self, seed):
        rng = np.random.default_rng(seed)
        n, d, k = int(rng.integers(5, 40)), int(rng.integers(1, 6)), int(rng.integers(1, 6))
        # small integer grid produces many exact distance ties
        train_x = rng.integers(0, 3, size=(n, d)).astype(np.float64)
        train_y = rng.integers(0, 4, size=n)
        query = rng.integers(0, 3, size=(15, d)).astype(np.float64)
        k = min(k, n)
        expected = _brute_force_knn(train_x, train_y, query, k)
        np.testing.assert_array_equal(knn_predict(LatentDataset(train_x, train_y), query, k), expected)

    def test_k_larger_than_train(self):
        with pytest.raises(ConfigError):
            knn_predict(LatentDataset(np.zeros((2, 2)), np.array([0, 1])), np.zeros((1, 2)), k=3)

    def test_query_width(self):
        with pytest.raises(TensorShapeError):
            knn_predict(LatentDataset(np.zeros((4, 2)), np.array([0, 1, 0, 1])), np.zeros((1, 3)))

    def test_estimator_maps_labels_back(self):
        X, y = _blobs(10, [(0, 0), (5, 5), (0, 5)])
        labels = np.array([3, 7, 9])[y]
        clf = KNearestNeighbors(n_neighbors=3).fit(X, labels)
        assert set(clf.predict(X)) <= {3, 7, 9}
        assert clf.score(X, labels) == 1.0


@pytest.mark.unit
class TestGnb:
    def test_one_dimensional_example(self):
        model = gnb_fit(LatentDataset(np.array([[0.0], [0.1], [5.0], [5.1]]), np.array([0, 0, 1, 1])))
        assert gnb_predict(model, np.array([[0.05], [5.0]])).tolist() == [0, 1]
        np.testing.assert_allclose(model.priors, [0.5, 0.5])

    def test_constant_features_stay_finite(self):
        model = gnb_fit(LatentDataset(np.ones((4, 2)), np.array([0, 1, 0, 1])))
        assert model.epsilon == pytest.approx(1e-9)
        # identical classes: tie goes to the lowest label
        assert gnb_predict(model, np.ones((1, 2))).tolist() == [0]

    def test_absent_class(self):
        with pytest.raises(EmptyDatasetError):
            gnb_fit(LatentDataset(np.zeros((3, 1)), np.array([0, 0, 2])), num_classes=3)

    @pytest.mark.parametrize("seed", range(100))
    def test_matches_sklearn(self, seed):
        rng = np.random.default_rng(seed)
        n, d, c = int(rng.integers(12, 80)), int(rng.integers(1, 9)), int(rng.integers(2, 5))
        y = rng.permutation(np.arange(n) % c)
        X = rng.normal(size=(n, d)) * rng.uniform(0.2, 3.0, size=d) + y[:, None] * rng.uniform(-1, 1, size=d)
        query = rng.normal(size=(30, d)) * 2

        ours = gnb_fit(LatentDataset(X, y))
        reference = GaussianNB().fit(X, y)
        np.testing.assert_allclose(ours.means, reference.theta_, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(ours.variances, reference.var_, rtol=1e-10, atol=1e-12)
        np.testing.assert_array_equal(gnb_predict(ours, query), reference.predict(query))

    def test_estimator(self):
        X, y = _blobs(15, [(0, 0), (4, 0)])
        assert GaussianNaiveBayes().fit(X, y).score(X, y) == 1.0

    def test_estimator_absent_class(self):
        X = np.zeros((3, 1))
        y = np.array([0, 0, 2])
        with pytest.raises(EmptyDatasetError, match=r"\[1\]"):
            GaussianNaiveBayes(num_classes=3).fit(X, y)
        with pytest.raises(EmptyDatasetError):
            load_classifier("gnb", {"num_classes": 3}).fit(X, y)
        # without num_classes only the observed labels are modeled
        assert GaussianNaiveBayes().fit(X, y).classes_.tolist() == [0, 2]


@pytest.mark.unit
class TestSvm:
    XOR_X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    XOR_Y = np.array([0, 0, 1, 1])

    def test_xor(self):
        model = svm_fit(LatentDataset(self.XOR_X, self.XOR_Y), C=10.0)
        assert model.gamma == pytest.approx(2.0)
        assert model.converged
        np.testing.assert_array_equal(svm_predict(model, self.XOR_X), self.XOR_Y)

    def test_separated_blobs_sign(self):
        X, y = _blobs(20, [(-3, -3), (3, 3)])
        model = svm_fit(LatentDataset(X, y))
        machine = model.machines[0]
        assert (machine.positive, machine.negative) == (0, 1)
        assert machine.decision_function(np.array([[-3.0, -3.0]]), model.gamma)[0] > 0
        assert machine.decision_function(np.array([[3.0, 3.0]]), model.gamma)[0] < 0

    def test_one_vs_one_machines(self):
        X, y = _blobs(15, [(0, 0), (6, 0), (0, 6)])
        model = svm_fit(LatentDataset(X, y))
        assert [(m.positive, m.negative) for m in model.machines] == [(0, 1), (0, 2), (1, 2)]
        np.testing.assert_array_equal(svm_predict(model, np.array([[0.0, 0.0], [6.0, 0.0], [0.0, 6.0]])), [0, 1, 2])

    @pytest.mark.parametrize("seed", range(5))
    def test_kkt_conditions_hold(self, seed):
        X, y = _blobs(30, [(-2, 0), (2, 0)], scale=0.5, seed=seed)
        model = svm_fit(LatentDataset(X, y), C=100.0, tol=1e-3)
        assert model.converged
        assert max(svm_kkt_violation(model, X, y)) <= 1e-3 + 1e-9

    def test_deterministic(self):
        X, y = _blobs(20, [(0, 0), (1.5, 0)], scale=1.0)
        a = svm_fit(LatentDataset(X, y), random_state=3)
        b = svm_fit(LatentDataset(X, y), random_state=3)
        np.testing.assert_array_equal(a.machines[0].alphas, b.machines[0].alphas)

    def test_subsampling_logs_warning(self, logger):
        X, y = _blobs(25, [(0, 0), (5, 5)])
        model = svm_fit(LatentDataset(X, y), max_samples=20, logger=logger)
        assert len(model.sample_index) == 20
        assert "[WARNING] SVM: subsampling 20 of 50" in logger.log_file.read_text()

    def test_fits_every_row_by_default(self, logger):
        X, y = _blobs(25, [(0, 0), (5, 5)])
        model = svm_fit(LatentDataset(X, y), logger=logger)
        assert model.sample_index is None
        assert RbfSvm().max_samples is None
        assert "subsampling" not in logger.log_file.read_text()

    def test_label_swap_flips_decision(self):
        rng = np.random.default_rng(0)
        for seed in range(20):
            X, y = _blobs(15, [(0, 0), (2.5, 1)], scale=1.0, seed=seed)
            a = svm_fit(LatentDataset(X, y), random_state=seed)
            b = svm_fit(LatentDataset(X, 1 - y), random_state=seed)
            query = rng.uniform(-2, 4, size=(50, 2))
            fa = a.machines[0].decision_function(query, a.gamma)
            fb = b.machines[0].decision_function(query, b.gamma)
            clear = np.abs(fa) > 1e-3
            np.testing.assert_array_equal(np.sign(fb[clear]), -np.sign(fa[clear]))
            np.testing.assert_array_equal(svm_predict(b, query[clear]), 1 - svm_predict(a, query[clear]))

    def test_sweep_cap_warns(self):
        X, y = _blobs(30, [(0, 0), (0.5, 0)], scale=1.0)
        with pytest.warns(ConvergenceWarning):
            model = svm_fit(LatentDataset(X, y), max_passes=1)
        assert not model.converged

    def test_single_class(self):
        with pytest.raises(ConfigError):
            svm_fit(LatentDataset(np.zeros((3, 2)), np.zeros(3, dtype=np.int64)))

    @pytest.mark.parametrize("gamma", [0, -1.0])
    def test_invalid_gamma(self, gamma):
        with pytest.raises(ConfigError):
            svm_fit(LatentDataset(self.XOR_X, self.XOR_Y), gamma=gamma)

    def test_estimator_api(self):
        X, y = _blobs(10, [(0, 0), (5, 5)])
        clf = RbfSvm(C=2.0)
        assert clf.get_params()["C"] == 2.0
        with warnings.catch_warnings():
            warnings.simplefilter("error", ConvergenceWarning)
            fitted = clone(clf).fit(X, y)
        assert fitted.score(X, y) == 1.0
        assert fitted.decision_function(X).sum(axis=1).tolist() == [1] * len(X)


@pytest.mark.unit
class TestStandardize:
    def test_example(self):
        train, applied = standardize(np.array([[1.0], [3.0]]), np.array([[5.0]]))
        np.testing.assert_allclose(train, [[-1.0], [1.0]])
        np.testing.assert_allclose(applied, [[3.0]])

    def test_constant_feature_is_finite(self):
        train, applied = standardize(np.array([[2.0, 1.0], [2.0, 3.0]]), np.array([[2.0, 0.0]]))
        assert np.all(np.isfinite(applied))
        np.testing.assert_array_equal(train[:, 0], 0.0)

    def test_matches_sklearn_scaler(self):
        X = np.random.default_rng(0).normal(3, 2, size=(40, 5))
        np.testing.assert_allclose(Standardizer().fit_transform(X), StandardScaler().fit_transform(X), atol=1e-12)

    def test_standardizing_twice_changes_nothing(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            X = rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 4), size=(int(rng.integers(3, 30)), 4))
            X[:, 0] = 7.0
            once = Standardizer().fit_transform(X)
            np.testing.assert_allclose(Standardizer().fit_transform(once), once, atol=1e-9)

    def test_feature_count(self):
        with pytest.raises(TensorShapeError):
            Standardizer().fit(np.ones((3, 2))).transform(np.ones((1, 3)))


@pytest.mark.unit
class TestRegistry:
    def test_defaults(self):
        clf = load_classifier("knn")
        assert isinstance(clf, KNearestNeighbors)
        assert clf.n_neighbors == 3

    def test_params_override_and_none_ignored(self):
        clf = load_classifier("svm", {"C": 5.0, "gamma": None, "random_state": 4})
        assert (clf.C, clf.gamma, clf.random_state) == (5.0, "scale", 4)

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            load_classifier("forest")

    def test_unknown_param(self):
        with pytest.raises(ConfigError):
            load_classifier("gnb", {"n_neighbors": 3})

    def test_output_path(self, tmp_path):
        assert get_output_path(tmp_path / "model.csae", "boundary.ppm") == tmp_path / "model_boundary.ppm"


@pytest.mark.unit
class TestPipeline:
    def test_extract_latent(self, small_model, dataset):
        latent = extract_latent(small_model, dataset.images, dataset.labels, batch_size=7)
        assert latent.z.shape == (len(dataset), 10)
        np.testing.assert_array_equal(latent.y, dataset.labels)

    @pytest.mark.parametrize("method", ["knn", "gnb", "svm"])
    def test_latent_pipeline(self, model_2d, dataset, method, logger):
        test = synthetic_raw(n=12, seed=5)
        result = pipeline_classify(
            model_2d, dataset.images, dataset.labels, test.images / 255.0, method, test.labels, logger=logger
        )
        assert result.predictions.shape == (12,)
        assert result.features == "latent"
        assert 0 <= result.metrics.accuracy <= 1

    def test_standardized_latent(self, model_2d, dataset):
        result = pipeline_classify(
            model_2d, dataset.images, dataset.labels, dataset.images, "knn", standardize_latent=True
        )
        assert result.metrics is None
        assert len(result.predictions) == len(dataset)

    def test_raw_pixel_baseline(self, dataset):
        test = synthetic_raw(n=18, seed=2)
        result = raw_pixel_classify(dataset.images, dataset.labels, test.images / 255.0, "knn", test.labels)
        assert result.features == "raw"
        assert result.metrics.accuracy >= 0.9
