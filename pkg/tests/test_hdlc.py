import numpy as np
import pytest

from gradcheck import check_gradients
from leukopipe import hdlc
from leukopipe import tensor as T
from leukopipe.errors import DataError, DimensionError, TrainingError
from leukopipe.hdlc import (
    ConfusionMatrix,
    HDLCConfig,
    TrainConfig,
    confusion,
    hdlc_forward,
    init_model,
    metrics,
    predict,
    roc_auc,
    train,
)
from leukopipe.seeding import substream

TOY_WIDTHS = (8, 8, 8, 8, 8, 1)


def auc_pairwise_oracle(probs, labels):
    """P(score_pos > score_neg) + 0.5 P(tie), by exhaustive pairs."""
    pos = [p for p, y in zip(probs, labels) if y == 1]
    neg = [p for p, y in zip(probs, labels) if y == 0]
    wins = ties = 0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1
            elif p == q:
                ties += 1
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


class TestForward:
    def test_output_in_unit_interval(self):
        config = HDLCConfig(input_dim=6, dense_widths=TOY_WIDTHS)
        model = init_model(config, substream(0, "h"))
        rng = np.random.default_rng(1)
        out = predict(model, rng.normal(scale=10.0, size=(20, 6)))
        assert ((out >= 0.0) & (out <= 1.0)).all()

    def test_zero_weights_give_half(self):
        config = HDLCConfig(input_dim=5, dense_widths=TOY_WIDTHS)
        model = init_model(config, substream(1, "h"))
        for t in hdlc.named_parameters(model).values():
            t.data[:] = 0.0
        out = predict(model, np.random.default_rng(2).normal(size=(4, 5)))
        np.testing.assert_array_equal(out, np.full(4, 0.5))

    def test_single_vector_gives_scalar(self):
        config = HDLCConfig(input_dim=4, dense_widths=TOY_WIDTHS)
        model = init_model(config, substream(3, "h"))
        out = hdlc_forward(model, np.ones(4))
        assert out.shape == ()

    def test_too_narrow_input_rejected(self):
        with pytest.raises(DimensionError):
            HDLCConfig(input_dim=2, dense_widths=TOY_WIDTHS)

    def test_width_mismatch_rejected(self):
        config = HDLCConfig(input_dim=4, dense_widths=TOY_WIDTHS)
        model = init_model(config, substream(4, "h"))
        with pytest.raises(DimensionError):
            hdlc_forward(model, np.ones((2, 5)))

    def test_grads_vs_finite_differences(self):
        config = HDLCConfig(input_dim=3, dense_widths=TOY_WIDTHS)
        model = init_model(config, substream(5, "h"))
        rng = np.random.default_rng(6)
        x = rng.normal(size=(3, 3))
        y = np.array([1.0, 0.0, 1.0])
        # conv weights plus one early and one late dense layer keep the
        # check fast; the full-parameter sweep runs in the acceptance suite
        params = [model.conv_w, model.conv_b, model.dense[1][0],
                  model.dense[1][1], model.dense[5][0], model.dense[5][1]]

        def loss():
            return hdlc.bce_loss(hdlc_forward(model, x), y)

        check_gradients(loss, params, h=1e-5, fallback_h=1e-3)


class TestTrain:
    def _separable(self, n=200):
        rng = np.random.default_rng(7)
        half = n // 2
        x = np.vstack([rng.normal(-2.0, 0.5, size=(half, 2)),
                       rng.normal(2.0, 0.5, size=(half, 2))])
        x = np.column_stack([x, np.ones(n)])  # pad to the 3-wide minimum
        y = np.array([0] * half + [1] * half)
        order = rng.permutation(n)
        return x[order], y[order]

    def test_separable_reaches_high_accuracy(self):
        x, y = self._separable()
        config = HDLCConfig(input_dim=3, dense_widths=TOY_WIDTHS)
        model = init_model(config, substream(8, "h"))
        train(model, x, y, TrainConfig(epochs=200, learning_rate=0.05, batch_size=32),
              substream(9, "h"))
        acc = ((predict(model, x) >= 0.5).astype(int) == y).mean()
        assert acc >= 0.99

    def test_zero_learning_rate_keeps_parameters(self):
        x, y = self._separable(40)
        config = HDLCConfig(input_dim=3, dense_widths=TOY_WIDTHS)
        model = init_model(config, substream(10, "h"))
        before = {k: v.data.copy() for k, v in hdlc.named_parameters(model).items()}
        train(model, x, y, TrainConfig(epochs=3, learning_rate=0.0, batch_size=16),
              substream(11, "h"))
        for name, tens in hdlc.named_parameters(model).items():
            np.testing.assert_array_equal(tens.data, before[name])

    def test_identical_seeds_identical_traces(self):
        x, y = self._separable(60)
        config = HDLCConfig(input_dim=3, dense_widths=TOY_WIDTHS)
        traces = []
        for _ in range(2):
            model = init_model(config, substream(12, "h"))
            traces.append(train(model, x, y,
                                TrainConfig(epochs=5, learning_rate=0.01, batch_size=16),
                                substream(13, "h")))
        assert traces[0] == traces[1]

    def test_single_class_rejected(self):
        config = HDLCConfig(input_dim=3, dense_widths=TOY_WIDTHS)
        model = init_model(config, substream(14, "h"))
        with pytest.raises(TrainingError):
            train(model, np.ones((10, 3)), np.zeros(10, dtype=int),
                  TrainConfig(epochs=1), substream(15, "h"))


class TestConfusion:
    def test_basic_tally(self):
        cm = confusion([0.9, 0.2], [1, 0], 0.5)
        assert (cm.tp, cm.tn, cm.fp, cm.fn) == (1, 1, 0, 0)

    def test_threshold_zero_everything_positive(self):
        cm = confusion([0.3, 0.7, 0.1], [1, 0, 1], 0.0)
        assert cm.tn == 0 and cm.fn == 0
        assert cm.tp == 2 and cm.fp == 1

    def test_threshold_above_one_everything_negative(self):
        cm = confusion([0.3, 0.7, 0.9], [1, 0, 1], 1.01)
        assert cm.tp == 0 and cm.fp == 0
        assert cm.tn == 1 and cm.fn == 2

    def test_counts_sum_to_n(self):
        rng = np.random.default_rng(16)
        probs = rng.random(50)
        labels = rng.integers(0, 2, 50)
        cm = confusion(probs, labels, 0.4)
        assert cm.total == 50

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            confusion([0.5], [1, 0], 0.5)

    def test_non_binary_labels(self):
        with pytest.raises(DataError):
            confusion([0.5, 0.5], [1, 2], 0.5)


class TestMetrics:
    def test_hand_example(self):
        report = metrics(ConfusionMatrix(tp=9, fp=1, tn=8, fn=2))
        assert abs(report.accuracy - 0.85) < 1e-12
        assert abs(report.precision - 0.9) < 1e-12
        assert abs(report.recall - 9 / 11) < 1e-12
        assert round(report.recall, 4) == 0.8182
        assert round(report.f1, 4) == 0.8571
        assert report.undefined == ()

    def test_perfect_classifier(self):
        report = metrics(ConfusionMatrix(tp=5, fp=0, tn=5, fn=0))
        assert (report.accuracy, report.precision, report.recall, report.f1) == \
            (1.0, 1.0, 1.0, 1.0)

    def test_zero_denominator_flagged(self):
        report = metrics(ConfusionMatrix(tp=0, fp=0, tn=4, fn=2))
        assert report.precision == 0.0
        assert "precision" in report.undefined
        assert report.f1 == 0.0 and "f1" in report.undefined

    def test_f1_is_harmonic_mean(self):
        report = metrics(ConfusionMatrix(tp=7, fp=3, tn=5, fn=4))
        expected = 2 * report.precision * report.recall / (report.precision + report.recall)
        assert abs(report.f1 - expected) < 1e-12

    def test_empty_matrix_rejected(self):
        with pytest.raises(DataError):
            metrics(ConfusionMatrix(0, 0, 0, 0))

    def test_sample_order_invariance(self):
        rng = np.random.default_rng(17)
        probs = rng.random(40)
        labels = rng.integers(0, 2, 40)
        perm = rng.permutation(40)
        a = metrics(confusion(probs, labels, 0.5))
        b = metrics(confusion(probs[perm], labels[perm], 0.5))
        assert a == b


class TestRocAuc:
    def test_perfect_ranking(self):
        points, auc = roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert auc == 1.0
        assert points[0][1:] == (0.0, 0.0)
        assert points[-1][1:] == (1.0, 1.0)

    def test_random_scores_near_half(self):
        rng = np.random.default_rng(18)
        probs = rng.random(4000)
        labels = rng.integers(0, 2, 4000)
        _, auc = roc_auc(probs, labels)
        assert abs(auc - 0.5) < 0.05

    def test_matches_pairwise_oracle_with_ties(self):
        rng = np.random.default_rng(19)
        probs = np.round(rng.random(100), 1)  # coarse grid forces ties
        labels = rng.integers(0, 2, 100)
        _, auc = roc_auc(probs, labels)
        assert abs(auc - auc_pairwise_oracle(probs, labels)) < 1e-12

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(20)
        probs = rng.random(60)
        labels = rng.integers(0, 2, 60)
        _, auc = roc_auc(probs, labels)
        _, auc2 = roc_auc(1.0 / (1.0 + np.exp(-5.0 * probs)), labels)
        assert abs(auc - auc2) < 1e-12

    def test_descending_thresholds_and_monotone_rates(self):
        rng = np.random.default_rng(21)
        probs = rng.random(30)
        labels = rng.integers(0, 2, 30)
        points, _ = roc_auc(probs, labels)
        thresholds = [p[0] for p in points]
        assert thresholds == sorted(thresholds, reverse=True)
        fprs = [p[1] for p in points]
        tprs = [p[2] for p in points]
        assert all(b >= a for a, b in zip(fprs, fprs[1:]))
        assert all(b >= a for a, b in zip(tprs, tprs[1:]))

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            roc_auc([0.1, 0.9], [1, 1])


class TestPersistence:
    def test_model_round_trip(self, tmp_path):
        from leukopipe.container import load_tensors, save_tensors
        config = HDLCConfig(input_dim=4, dense_widths=TOY_WIDTHS)
        model = init_model(config, substream(22, "h"))
        named = {k: v.data for k, v in hdlc.named_parameters(model).items()}
        save_tensors(tmp_path / "hdlc.ctcn", named)
        loaded = hdlc.load_model(config, load_tensors(tmp_path / "hdlc.ctcn"))
        x = np.random.default_rng(23).normal(size=(3, 4))
        np.testing.assert_array_equal(predict(loaded, x), predict(model, x))
