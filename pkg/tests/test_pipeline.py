import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from knockclf.audio import Manifest, ManifestEntry, Provenance
from knockclf.errors import StratificationError
from knockclf.neural import ModelConfig
from knockclf.pipeline import (
    PUBLISHED_RNN_LSTM,
    PUBLISHED_MODELS,
    ConfusionMatrix,
    MetricsReport,
    SplitConfig,
    TrainLog,
    argmax_labels,
    baseline_linear,
    compare_models,
    confusion,
    fit,
    kfold_indices,
    kfold_split,
    metrics,
    outlier_filter,
    predict_features,
    split_indices,
    split_train_test,
    verdict,
    welch_p_value,
)
from oracles import hand_metrics, tally

# Per-class recall read off the published confusion matrices (percent).
PUBLISHED_CLASS_RECALL = {"rnn": (99.75, 94.07, 98.12), "lstm": (100.0, 93.83, 98.12)}


def labels_for(counts):
    return np.repeat(np.arange(3), counts)


def manifest_for(counts):
    return Manifest([ManifestEntry(f"c{i}.wav", int(l), Provenance.SYNTHETIC, f"c{i}") for i, l in enumerate(labels_for(counts))])


class TestSplit:
    def test_default_target_split(self):
        train, test = split_indices(labels_for((4050, 4050, 5850)), 0.1, seed=0)
        assert (len(train), len(test)) == (12555, 1395)
        assert np.bincount(labels_for((4050, 4050, 5850))[test]).tolist() == [405, 405, 585]

    def test_deterministic_disjoint_exhaustive(self):
        y = labels_for((30, 41, 57))
        a = split_indices(y, 0.1, seed=3)
        b = split_indices(y, 0.1, seed=3)
        assert all(np.array_equal(u, v) for u, v in zip(a, b))
        assert not set(a[0]) & set(a[1])
        assert sorted(np.concatenate(a)) == list(range(len(y)))

    def test_round_half_up(self):
        _, test = split_indices(labels_for((25, 15, 35)), 0.1, seed=0)
        assert np.bincount(labels_for((25, 15, 35))[test]).tolist() == [3, 2, 4]

    def test_manifest_split(self):
        tr, te = split_train_test(manifest_for((10, 20, 30)), SplitConfig(seed=1))
        assert te.counts() == [1, 2, 3] and tr.counts() == [9, 18, 27]

    def test_empty_class(self):
        with pytest.raises(StratificationError):
            split_indices(labels_for((5, 0, 5)), 0.1, 0)

    def test_config(self):
        for bad in (dict(test_fraction=0.0), dict(test_fraction=1.0), dict(k_folds=1)):
            with pytest.raises(ValueError):
                SplitConfig(**bad)


class TestKFold:
    def test_hundred_clips(self):
        folds = kfold_indices(labels_for((30, 30, 40)), 5, seed=0)
        assert [len(v) for _, v in folds] == [20] * 5

    @settings(max_examples=30, deadline=None)
    @given(st.tuples(*[st.integers(5, 40)] * 3), st.integers(2, 5), st.integers(0, 10))
    def test_partition_properties(self, counts, k, seed):
        y = labels_for(counts)
        folds = kfold_indices(y, k, seed)
        vals = np.concatenate([v for _, v in folds])
        assert sorted(vals) == list(range(len(y)))
        for tr, va in folds:
            assert not set(tr) & set(va)
        per_class = np.array([np.bincount(y[v], minlength=3) for _, v in folds])
        assert np.all(per_class.max(axis=0) - per_class.min(axis=0) <= 1)
        # class ratios per fold within one clip of the global ratio
        for row, (_, va) in zip(per_class, folds):
            assert np.all(np.abs(row - len(va) * np.array(counts) / len(y)) <= 1 + 1e-9)
        again = kfold_indices(y, k, seed)
        assert all(np.array_equal(a[1], b[1]) for a, b in zip(folds, again))

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            kfold_indices(labels_for((3, 10, 10)), 4, 0)

    def test_manifest_kfold(self):
        folds = kfold_split(manifest_for((5, 5, 5)), SplitConfig(k_folds=5))
        assert [v.counts() for _, v in folds] == [[1, 1, 1]] * 5


class TestConfusion:
    def test_cases(self):
        assert np.array_equal(confusion([(0, 0), (1, 1), (2, 2)]).counts, np.eye(3, dtype=int))
        cm = confusion([(0, 1)]).counts
        assert cm[0, 1] == 1 and cm.sum() == 1

    def test_tally_oracle(self):
        rng = np.random.default_rng(0)
        pairs = [tuple(p) for p in rng.integers(0, 3, (1000, 2))]
        assert np.array_equal(confusion(pairs).counts, tally(pairs))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            confusion([(0, 3)])
        with pytest.raises(ValueError):
            ConfusionMatrix(-np.eye(3))


class TestMetrics:
    def test_perfect(self):
        r = metrics(ConfusionMatrix(np.diag([3, 4, 5])))
        assert r.indicators == (100.0, 100.0, 100.0, 100.0)

    def test_worked_example(self):
        r = metrics(ConfusionMatrix([[8, 2, 0], [1, 9, 0], [0, 0, 10]]))
        assert r.accuracy == pytest.approx(90.0, abs=1e-12)
        c0 = r.per_class[0]
        assert c0.precision == pytest.approx(800 / 9, abs=1e-12)
        assert c0.recall == pytest.approx(80.0, abs=1e-12)
        assert c0.f1 == pytest.approx(84.2105263, abs=1e-6)

    def test_degenerate(self):
        r = metrics(ConfusionMatrix([[5, 0, 0], [3, 0, 0], [2, 0, 0]]))
        assert r.per_class[1].degenerate and r.per_class[1].precision == 0.0
        assert not r.per_class[0].degenerate
        with pytest.raises(ValueError):
            metrics(ConfusionMatrix(np.zeros((3, 3))))

    def test_random_matrices_match_hand_formulas(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            m = rng.integers(0, 50, (3, 3)).tolist()
            r = metrics(ConfusionMatrix(m))
            acc, rows = hand_metrics(m)
            assert abs(r.accuracy - acc) <= 1e-9
            for got, (p, rc, f) in zip(r.per_class, rows):
                assert abs(got.precision - p) <= 1e-9
                assert abs(got.recall - rc) <= 1e-9
                assert abs(got.f1 - f) <= 1e-9
            assert abs(r.f1_macro - np.mean([x[2] for x in rows])) <= 1e-9

    @settings(max_examples=100)
    @given(st.lists(st.integers(0, 30), min_size=9, max_size=9).filter(lambda v: sum(v) > 0))
    def test_properties(self, flat):
        cm = ConfusionMatrix(np.array(flat).reshape(3, 3))
        r = metrics(cm)
        support = cm.counts.sum(axis=1)
        weighted = sum(c.recall * s for c, s in zip(r.per_class, support)) / support.sum()
        assert abs(r.accuracy - weighted) <= 1e-9
        for c in r.per_class:
            assert 0 <= c.precision <= 100 and 0 <= c.recall <= 100
            assert min(c.precision, c.recall) - 1e-9 <= c.f1 <= max(c.precision, c.recall) + 1e-9

    def test_report_json_round_trip(self):
        r = metrics(ConfusionMatrix([[8, 2, 0], [1, 9, 0], [0, 0, 10]]))
        d = r.to_dict()
        assert d["version"] == 1
        assert set(d) >= {"accuracy", "precision_macro", "recall_macro", "f1_macro", "per_class", "confusion"}
        back = MetricsReport.from_dict(d)
        assert back.indicators == r.indicators
        assert np.array_equal(back.confusion.counts, r.confusion.counts)


class TestComparison:
    def test_identical(self):
        r = metrics(ConfusionMatrix([[8, 2, 0], [1, 9, 0], [0, 0, 10]]))
        assert compare_models(r, r) == 1.0
        assert welch_p_value([5, 5, 5], [5, 5, 5]) == 1.0

    def test_matches_scipy_formula(self):
        a, b = [1.0, 2.5, 3.1, 4.0], [2.0, 2.2, 5.0, 6.1]
        va, vb = np.var(a, ddof=1) / 4, np.var(b, ddof=1) / 4
        t = (np.mean(a) - np.mean(b)) / np.sqrt(va + vb)
        dof = (va + vb) ** 2 / (va**2 / 3 + vb**2 / 3)
        assert welch_p_value(a, b) == pytest.approx(2 * stats.t.sf(abs(t), dof), rel=1e-12)

    def test_published_rnn_vs_lstm(self):
        p = compare_models(PUBLISHED_RNN_LSTM["rnn"], PUBLISHED_RNN_LSTM["lstm"])
        assert p > 0.05 and verdict(p) == "no significant difference"
        assert p == pytest.approx(0.797, abs=1e-3)

    def test_published_value_with_class_recalls(self):
        a = PUBLISHED_RNN_LSTM["rnn"] + PUBLISHED_CLASS_RECALL["rnn"]
        b = PUBLISHED_RNN_LSTM["lstm"] + PUBLISHED_CLASS_RECALL["lstm"]
        assert compare_models(a, b) > 0.9
        assert round(compare_models(a, b), 3) == 0.993

    def test_report_option_appends_recalls(self):
        r = metrics(ConfusionMatrix([[8, 2, 0], [1, 9, 0], [0, 0, 10]]))
        s = metrics(ConfusionMatrix([[9, 1, 0], [1, 9, 0], [0, 1, 9]]))
        expect = welch_p_value(r.indicators + (80.0, 90.0, 100.0), s.indicators + (90.0, 90.0, 90.0))
        assert compare_models(r, s, include_class_recall=True) == pytest.approx(expect, abs=1e-12)

    def test_deep_vs_classical(self):
        deep = PUBLISHED_MODELS["rnn"] + PUBLISHED_MODELS["lstm"]
        classical = PUBLISHED_MODELS["ann"] + PUBLISHED_MODELS["rf"] + PUBLISHED_MODELS["svm"]
        p = compare_models(deep, classical)
        assert p < 0.05 and verdict(p) == "significant difference"

    def test_too_few(self):
        with pytest.raises(ValueError):
            welch_p_value([1.0], [2.0, 3.0])


SMALL = dict(in_channels=16, conv1_channels=4, conv2_channels=6, frame_units=8, hidden_units=8)


def blobs(n, seed, shape=(16, 6), sep=3.0):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 3, n)
    centres = np.random.default_rng(100).standard_normal((3,) + shape)
    return centres[y] * sep + rng.standard_normal((n,) + shape), y


class TestTraining:
    def test_toy_overfit(self):
        X, y = blobs(2, 0)
        cfg = ModelConfig(dropout_p=0.0, **SMALL)
        _, logbook = fit(X, y, X, y, cfg, seed=0)
        assert len(logbook) == 60
        assert logbook.train_loss[-1] < logbook.train_loss[0]

    def test_deterministic(self):
        X, y = blobs(40, 1)
        cfg = ModelConfig(epochs=3, batch_size=16, **SMALL)
        a_ck, a = fit(X[:30], y[:30], X[30:], y[30:], cfg, seed=5)
        b_ck, b = fit(X[:30], y[:30], X[30:], y[30:], cfg, seed=5)
        assert a.train_loss == b.train_loss and a.val_loss == b.val_loss
        assert all(np.array_equal(a_ck.params[k], b_ck.params[k]) for k in a_ck.params)

    def test_best_epoch_tracking(self):
        X, y = blobs(60, 2)
        cfg = ModelConfig(epochs=8, batch_size=16, **SMALL)
        ck, logbook = fit(X[:45], y[:45], X[45:], y[45:], cfg, seed=1)
        assert logbook.best_validation_loss == min(logbook.val_loss)
        assert ck.metadata["best_epoch"] == logbook.best_epoch
        assert ck.metadata["epochs_run"] == 8

    def test_empty(self):
        with pytest.raises(ValueError):
            fit(np.zeros((0, 16, 6)), [], np.zeros((0, 16, 6)), [], ModelConfig(**SMALL), 0)

    def test_trainlog_csv(self, tmp_path):
        t = TrainLog()
        t.record(1.0, 0.9)
        t.record(0.5, 0.95)
        t.write_csv(tmp_path / "log.csv")
        assert (tmp_path / "log.csv").read_text().splitlines()[0] == "epoch,train_loss,val_loss"
        back = TrainLog.read_csv(tmp_path / "log.csv")
        assert back.val_loss == [0.9, 0.95] and back.best_epoch == 1


class TestPredict:
    def test_argmax_and_ties(self):
        assert argmax_labels([[5, -1, -1], [1, 1, 0], [0, 2, 2]]).tolist() == [0, 0, 1]

    def test_repeatable(self):
        X, y = blobs(20, 3)
        ck, _ = fit(X, y, X, y, ModelConfig(epochs=2, **SMALL), seed=0)
        assert np.array_equal(predict_features(ck, X), predict_features(ck, X))


class TestBaseline:
    def test_separable(self):
        X, y = blobs(300, 4, sep=5.0)
        _, test_acc = baseline_linear(X[:200], y[:200], X[200:], y[200:], seed=0)
        assert test_acc == 100.0

    def test_shuffled_labels_near_chance(self):
        accs = []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            X = rng.standard_normal((600, 16, 6))
            y = rng.integers(0, 3, 600)
            accs.append(baseline_linear(X[:450], y[:450], X[450:], y[450:], seed=seed)[1])
        assert abs(np.mean(accs) - 100 / 3) <= 10


class TestOutliers:
    def test_identical(self):
        X = np.ones((10, 4))
        assert outlier_filter(X, np.zeros(10, int)).all()

    def test_single_outlier(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((51, 8)) * 0.01 + 1.0
        X[17] *= 100
        keep = outlier_filter(X, np.zeros(51, int))
        assert np.flatnonzero(~keep).tolist() == [17]

    def test_boundary(self):
        # norms with z-scores of exactly +-2.9 are kept at threshold 3
        z = np.array([-2.9, 2.9] + [0.0] * 4)
        norms = 10 + z * 1.0
        z_actual = (norms - norms.mean()) / norms.std()
        assert np.all(np.abs(z_actual) < 3)
        keep = outlier_filter(norms[:, None], np.zeros(len(norms), int))
        assert keep.all()

    def test_never_below_half(self):
        X = np.concatenate([np.ones((4, 1)), np.full((4, 1), 1e6)])
        keep = outlier_filter(X, np.zeros(8, int), threshold=0.5)
        assert keep.sum() >= 4

    def test_small_class_skipped(self):
        assert outlier_filter(np.array([[1.0], [100.0]]), np.array([0, 0])).all()
