import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from daembed import (
    AlignmentError,
    DocumentEncoder,
    EmbeddingTable,
    L2LogisticRegression,
    LabeledDataset,
    ParseError,
    Vocabulary,
    cross_validate,
    encode_documents,
    load_dataset,
    metrics,
    stratified_folds,
    train_logreg,
)
from daembed.evaluation import cross_validate_features, logistic_objective, roc_auc
from daembed.synthetic import sentiment_world

from oracles import auc_pairs, central_difference, logistic_loss, precision_f1

AB = EmbeddingTable(Vocabulary(["a", "b"]), [[1.0, 0.0], [0.0, 1.0]])


class TestDataset:
    def test_load(self, write):
        ds = load_dataset(write("yelp.tsv", "Good food!\t1\n\nAwful.\t0\nok\tthen\t1\n"))
        assert ds.name == "yelp"
        assert ds.documents == (("good", "food"), ("awful",), ("ok", "then"))
        np.testing.assert_array_equal(ds.labels, [1, 0, 1])

    @pytest.mark.parametrize("text,line", [("a\t1\nb\t2\n", 2), ("a 1\n", 1)])
    def test_parse_errors(self, write, text, line):
        with pytest.raises(ParseError) as err:
            load_dataset(write("d.tsv", text))
        assert err.value.line == line

    def test_needs_both_classes(self, write):
        with pytest.raises(ParseError):
            load_dataset(write("d.tsv", "a\t1\nb\t1\n"))
        with pytest.raises(ValueError):
            LabeledDataset((("a",),), np.array([1]), "x")

    def test_empty_file(self, write):
        with pytest.raises(ParseError):
            load_dataset(write("d.tsv", ""))


class TestEncode:
    def test_frequency_weighted_mean(self):
        np.testing.assert_allclose(encode_documents([["a", "a", "b"]], AB), [[2 / 3, 1 / 3]])

    def test_oov_skip(self):
        np.testing.assert_array_equal(encode_documents([["a", "x"]], AB), [[1.0, 0.0]])

    def test_oov_zero(self):
        np.testing.assert_allclose(encode_documents([["a", "x"]], AB, oov_policy="zero"),
                                   [[0.5, 0.0]])

    def test_tf_idf_zero_idf(self):
        docs = [["a", "b"], ["a"]]
        # idf(a) = ln(2/2) = 0, idf(b) = ln 2: first document is exactly b
        out = encode_documents(docs, AB, weighting="tf-idf")
        np.testing.assert_allclose(out[0], [0.0, 1.0])

    def test_empty_documents_flagged(self):
        out, empty = encode_documents([["a"], ["x"], []], AB, return_empty=True)
        np.testing.assert_array_equal(empty, [False, True, True])
        np.testing.assert_array_equal(out[1:], 0.0)

    def test_all_oov(self):
        with pytest.raises(AlignmentError):
            encode_documents([["x"], ["y"]], AB)

    def test_options(self):
        with pytest.raises(ValueError):
            encode_documents([["a"]], AB, weighting="max")
        with pytest.raises(ValueError):
            encode_documents([["a"]], AB, oov_policy="drop")

    def test_encoder_estimator(self):
        enc = DocumentEncoder(AB)
        np.testing.assert_allclose(enc.fit_transform([["a", "b"]]), [[0.5, 0.5]])
        assert set(enc.get_params()) == {"table", "weighting", "oov_policy"}


class TestLogisticRegression:
    def test_separable(self):
        X = np.array([[-2.0], [-1.0], [-0.5], [0.5], [1.0], [2.0]])
        y = np.array([0, 0, 0, 1, 1, 1])
        m = train_logreg(X, y, l2_lambda=1.0)
        assert m.converged and m.grad_norm < 1e-6
        assert np.all((m.predict_proba(X) >= 0.5) == y)

    def test_single_class(self):
        with pytest.raises(ValueError):
            train_logreg(np.zeros((3, 1)), [1, 1, 1])

    def test_non_finite(self):
        with pytest.raises(ValueError):
            train_logreg(np.array([[np.nan], [1.0]]), [0, 1])

    @given(st.integers(1, 10), st.integers(4, 50), st.floats(0.0, 3.0), st.integers(0, 2 ** 16))
    def test_gradient(self, d, n, lam, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, d))
        y = (rng.random(n) < 0.5).astype(float)
        theta = rng.normal(size=d + 1)
        loss, grad = logistic_objective(theta, X, y, lam)
        assert abs(loss - logistic_loss(theta, X, y, lam)) <= 1e-12 * max(1.0, loss)
        fd = central_difference(lambda t: logistic_objective(t, X, y, lam)[0], theta)
        scale = np.maximum(np.abs(fd), 1e-3)
        assert np.max(np.abs(grad - fd) / scale) <= 1e-5

    @given(st.integers(1, 6), st.integers(10, 60), st.floats(1e-3, 3.0), st.integers(0, 2 ** 16))
    def test_monotone_and_converged(self, d, n, lam, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, d))
        y = np.arange(n) % 2
        m = train_logreg(X, y, lam)
        assert m.converged and m.grad_norm < 1e-6
        assert np.all(np.diff(m.losses) <= 0)

    def test_matches_sklearn(self, rng):
        from sklearn.linear_model import LogisticRegression

        X = rng.normal(size=(80, 4))
        y = (X @ [1.0, -2.0, 0.5, 0.0] + rng.normal(size=80) > 0).astype(int)
        lam = 0.3
        m = train_logreg(X, y, lam, tol=1e-10)
        # sklearn: C * sum(loss) + ||w||^2 / 2 == (mean loss + lam/2 ||w||^2) * n * C
        ref = LogisticRegression(C=1.0 / (lam * len(y)), tol=1e-12, max_iter=10000).fit(X, y)
        np.testing.assert_allclose(m.weights, ref.coef_[0], atol=1e-5)
        np.testing.assert_allclose(m.bias, ref.intercept_[0], atol=1e-5)

    def test_max_iter_flag(self, rng):
        X = rng.normal(size=(30, 3))
        y = np.arange(30) % 2
        with pytest.warns(RuntimeWarning):
            m = train_logreg(X, y, 1e-3, tol=1e-30, max_iter=2)
        assert not m.converged and m.n_iter == 2

    def test_estimator(self, rng):
        X = rng.normal(size=(40, 2))
        y = (X[:, 0] > 0).astype(int)
        clf = L2LogisticRegression(l2_lambda=0.1).fit(X, y)
        assert clf.score(X, y) > 0.9
        assert clf.predict_proba(X).shape == (40, 2)
        np.testing.assert_array_equal(clf.classes_, [0, 1])


class TestMetrics:
    def test_perfect(self):
        m = metrics([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert m.as_tuple() == (1.0, 1.0, 1.0)

    def test_constant_scores(self):
        assert metrics([0.3] * 6, [1, 0, 1, 0, 1, 1]).auc == 0.5

    def test_hand_example(self):
        m = metrics([0.9, 0.8, 0.4, 0.3], [1, 0, 1, 0])
        assert (m.precision, m.f_score, m.auc) == (0.5, 0.5, 0.75)

    def test_single_class(self):
        with pytest.raises(ValueError, match="AUC"):
            metrics([0.1, 0.2], [1, 1])

    def test_nothing_predicted_positive(self):
        m = metrics([0.1, 0.2, 0.3], [1, 0, 1])
        assert m.precision == 0.0 and m.f_score == 0.0

    @given(st.data())
    def test_brute_force(self, data):
        n = data.draw(st.integers(2, 20))
        labels = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
        assume(0 < sum(labels) < n)
        scores = data.draw(st.lists(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0])
                                    | st.floats(0, 1), min_size=n, max_size=n))
        m = metrics(scores, labels)
        p, f = precision_f1(scores, labels)
        assert abs(m.precision - p) <= 1e-12 and abs(m.f_score - f) <= 1e-12
        assert abs(m.auc - auc_pairs(scores, labels)) <= 1e-12
        assert all(0 <= v <= 1 for v in m.as_tuple())

    @given(st.lists(st.floats(-5, 5), min_size=4, max_size=30), st.integers(0, 2 ** 16))
    def test_auc_monotone_invariance(self, scores, seed):
        rng = np.random.default_rng(seed)
        labels = rng.permutation(np.arange(len(scores)) % 2)
        s = np.asarray(scores)
        a, b = rng.uniform(0.1, 3.0, size=2)
        transformed = [s ** 3 * a + b, np.exp(a * s), np.arctan(s) + s]
        base = roc_auc(s, labels)
        for t in transformed:
            # ties in s must stay ties and order must be kept
            assume(np.array_equal(np.argsort(t, kind="stable"), np.argsort(s, kind="stable")))
            assume(len(np.unique(t)) == len(np.unique(s)))
            assert roc_auc(t, labels) == base

    def test_label_matching_and_inverted(self, rng):
        y = rng.permutation(np.arange(20) % 2)
        assert roc_auc(y.astype(float), y) == 1.0
        assert roc_auc(-y.astype(float), y) == 0.0


class TestFolds:
    @given(st.integers(2, 12), st.integers(0, 60), st.integers(1, 60), st.integers(0, 100))
    def test_stratification(self, k, n_pos, n_neg, seed):
        n = n_pos + n_neg
        assume(k <= n and n_pos >= k)
        labels = np.r_[np.ones(n_pos, int), np.zeros(n_neg, int)]
        labels = np.random.default_rng(seed).permutation(labels)
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            folds = stratified_folds(labels, k, seed)
        assert set(folds) == set(range(k))
        sizes = np.bincount(folds, minlength=k)
        assert sizes.max() - sizes.min() <= 1
        overall = labels.mean()
        for f in range(k):
            fold = labels[folds == f]
            assert abs(fold.mean() - overall) <= 1.0 / fold.size + 1e-12

    def test_deterministic_and_seeded(self):
        y = np.arange(40) % 2
        assert np.array_equal(stratified_folds(y, 5, 3), stratified_folds(y, 5, 3))
        assert not np.array_equal(stratified_folds(y, 5, 3), stratified_folds(y, 5, 4))

    def test_errors_and_warnings(self):
        y = np.array([0, 0, 0, 1, 1, 1])
        with pytest.raises(ValueError):
            stratified_folds(y, 7)
        with pytest.raises(ValueError):
            stratified_folds(y, 1)
        with pytest.warns(UserWarning):
            stratified_folds(y, 4)


@pytest.fixture(scope="module")
def world():
    return sentiment_world(n_docs=200, n_words=150, seed=11)


class TestCrossValidate:
    def test_report(self, world):
        rep = cross_validate(world.dataset, world.generic, folds=5, seed=0)
        assert rep.fold_metrics.shape == (5, 3)
        assert np.all((rep.fold_metrics >= 0) & (rep.fold_metrics <= 1))
        assert rep.mean["auc"] > 0.6
        # aggregation recomputed from stored out-of-fold scores
        for f in range(5):
            test = rep.folds == f
            again = metrics(rep.oof_scores[test], rep.labels[test]).as_tuple()
            np.testing.assert_array_equal(rep.fold_metrics[f], again)
        for j, name in enumerate(("precision", "f_score", "auc")):
            col = rep.fold_metrics[:, j]
            assert rep.mean[name] == float(np.mean(col))
            assert rep.std[name] == float(np.std(col, ddof=1))

    def test_same_seed_identical(self, world):
        a = cross_validate(world.dataset, world.generic, folds=10, seed=3)
        b = cross_validate(world.dataset, world.generic, folds=10, seed=3)
        assert a.to_tsv() == b.to_tsv() and a.summary() == b.summary()
        np.testing.assert_array_equal(a.oof_scores, b.oof_scores)

    def test_leave_one_out(self):
        docs = [["a"], ["b"], ["a", "b"], ["a", "a"], ["b", "b"],
                ["a"], ["b"], ["a", "a", "b"], ["b", "b", "a"], ["a"]]
        y = [1, 0, 1, 1, 0, 1, 0, 1, 0, 0]
        ds = LabeledDataset(tuple(map(tuple, docs)), np.array(y), "toy")
        with pytest.warns(UserWarning):
            rep = cross_validate(ds, AB, folds=10, seed=0)
        # single-example folds have no AUC; aggregates use pooled predictions
        assert np.isnan(rep.fold_metrics).all()
        assert rep.mean == {"precision": rep.pooled.precision, "f_score": rep.pooled.f_score,
                            "auc": rep.pooled.auc}

    def test_shared_folds(self, world):
        folds = stratified_folds(world.dataset.labels, 4, 9)
        rep = cross_validate(world.dataset, world.generic, folds=4, seed=0, fold_ids=folds)
        np.testing.assert_array_equal(rep.folds, folds)

    def test_standardize_off(self, world):
        rep = cross_validate(world.dataset, world.generic, folds=5, standardize=False)
        assert rep.mean["auc"] > 0.5

    def test_features_entry(self, rng):
        X = rng.normal(size=(60, 3))
        y = (X[:, 0] > 0).astype(int)
        rep = cross_validate_features(X, y, n_folds=3, seed=1)
        assert rep.mean["auc"] > 0.9
        assert "Avg F-score" in rep.summary()
        assert rep.to_tsv().splitlines()[0] == "fold\tprecision\tf_score\tauc"
