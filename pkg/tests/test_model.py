import numpy as np
import pytest

from careflow.eventlog import DemographicRecord
from careflow.model import (
    LAYER_NAMES,
    NetworkWeights,
    PredictionDataset,
    TrainConfig,
    bce_loss,
    encode_demographics,
    forward,
    gradients,
    init_weights,
    layer_shapes,
    predict_proba,
    train,
)
from oracles import finite_difference_gradients


def small_weights(seed=0, tss_width=12):
    return init_weights(layer_shapes(tss_width), seed)


def toy_dataset(rng, n, tss_width=12, labels=None):
    tss = rng.uniform(0, 1, size=(n, tss_width))
    demo = rng.uniform(0, 1, size=(n, 6))
    if labels is None:
        labels = rng.randint(0, 2, size=n)
    return PredictionDataset(
        samples=tss, demographics=demo, labels=np.asarray(labels),
        case_ids=[f"c{i}" for i in range(n)],
    )


class TestInit:
    def test_deterministic(self):
        a, b = small_weights(3), small_weights(3)
        np.testing.assert_array_equal(a.flat(), b.flat())
        c = small_weights(4)
        assert not np.array_equal(a.flat(), c.flat())

    def test_biases_zero(self):
        w = small_weights()
        for name in LAYER_NAMES:
            assert np.all(w.layers[name][1] == 0)

    def test_glorot_bound_for_66_wide_input(self):
        w = init_weights(layer_shapes(66), seed=1)
        bound = np.sqrt(6.0 / (66 + 76))
        assert bound == pytest.approx(0.20555, abs=1e-4)
        W = w.layers["tss1"][0]
        assert np.max(np.abs(W)) <= bound
        assert np.max(np.abs(W)) > 0.9 * bound  # actually fills the range

    def test_shapes(self):
        w = init_weights(layer_shapes(66), seed=1)
        expected = {
            "tss1": (66, 76), "tss2": (76, 20), "demo1": (6, 5),
            "head1": (25, 96), "head2": (96, 10), "out": (10, 1),
        }
        for name, shape in expected.items():
            assert w.layers[name][0].shape == shape
            assert w.layers[name][1].shape == (shape[1],)


class TestForward:
    def test_zero_weights_give_half(self):
        w = small_weights()
        for name in LAYER_NAMES:
            w.layers[name][0][:] = 0.0
        rng = np.random.RandomState(0)
        assert forward(w, rng.uniform(size=12), rng.uniform(size=6)) == 0.5

    def test_inference_deterministic(self):
        w = small_weights(2)
        rng = np.random.RandomState(1)
        tss, demo = rng.uniform(size=12), rng.uniform(size=6)
        assert forward(w, tss, demo) == forward(w, tss, demo)

    def test_width_mismatch(self):
        w = small_weights()
        with pytest.raises(ValueError):
            forward(w, np.zeros(13), np.zeros(6))

    def test_matches_straight_line_recomputation(self):
        # independent loop-free recomputation of the six layers
        w = small_weights(5)
        rng = np.random.RandomState(7)
        tss, demo = rng.uniform(size=12), rng.uniform(size=6)

        def dense(x, name):
            W, b = w.layers[name]
            return x @ W + b

        relu = lambda v: np.maximum(v, 0)
        a2 = relu(dense(relu(dense(tss, "tss1")), "tss2"))
        a3 = relu(dense(demo, "demo1"))
        h = relu(dense(relu(dense(np.concatenate([a2, a3]), "head1")), "head2"))
        z = dense(h, "out")[0]
        expected = 1.0 / (1.0 + np.exp(-z))
        assert forward(w, tss, demo) == pytest.approx(expected, rel=1e-12)

    def test_dropout_expectation_matches_inference(self):
        # inverted dropout: E[masked pre-activation] == inference pre-activation
        rate = 0.5
        rng = np.random.RandomState(11)
        draws = np.array(
            [
                ((rng.uniform(size=10_000) >= rate) / (1 - rate)).mean()
                for _ in range(20)
            ]
        )
        assert abs(draws.mean() - 1.0) < 0.01


class TestGradients:
    def test_finite_difference_full_network(self):
        w = small_weights(9)
        rng = np.random.RandomState(3)
        ds = toy_dataset(rng, 5, labels=[0, 1, 1, 0, 1])

        _, grads = gradients(w, ds.samples, ds.demographics, ds.labels, training=False)

        def loss_fn():
            probs = forward(w, ds.samples, ds.demographics)
            return bce_loss(probs, ds.labels)

        fd = finite_difference_gradients(loss_fn, w, h=1e-5)
        worst = 0.0
        for name in LAYER_NAMES:
            for got, want in zip(grads[name], fd[name]):
                denom = np.maximum(np.abs(want), 1e-3)
                worst = max(worst, float(np.max(np.abs(got - want) / denom)))
        assert worst < 1e-4

    def test_zero_gradient_rmsprop_step_is_noop(self):
        # g = 0 leaves both accumulator and weights unchanged
        v, theta = 0.5, 1.25
        g = 0.0
        v = 0.9 * v + 0.1 * g * g
        theta = theta - 5e-4 * g / (np.sqrt(v) + 1e-8)
        assert theta == 1.25


class TestTrain:
    def test_separable_toy_set_reaches_auc_1(self):
        rng = np.random.RandomState(0)
        labels = np.array([0, 1] * 10)
        tss = np.where(labels[:, None] == 1, 0.9, 0.1) + rng.uniform(
            -0.05, 0.05, size=(20, 12)
        )
        ds = PredictionDataset(
            samples=tss, demographics=rng.uniform(size=(20, 6)), labels=labels
        )
        cfg = TrainConfig(epochs=350, batch_size=50, seed=1, dropout=0.0)
        weights, history = train(ds, ds, cfg)
        from careflow.metrics import roc_auc

        assert roc_auc(predict_proba(weights, ds), ds.labels) == 1.0

    def test_deterministic_history_and_weights(self):
        rng = np.random.RandomState(5)
        ds = toy_dataset(rng, 30)
        val = toy_dataset(rng, 10)
        cfg = TrainConfig(epochs=5, seed=3)
        w1, h1 = train(ds, val, cfg)
        w2, h2 = train(ds, val, cfg)
        assert h1 == h2
        np.testing.assert_array_equal(w1.flat(), w2.flat())

    def test_final_val_auc_not_below_initial(self, synth_log):
        from careflow.decay import build_dataset, estimate_decay_params
        from careflow.discovery import discover
        from careflow.eventlog import split_cohort
        from careflow.metrics import roc_auc

        parts = split_cohort(synth_log, seed=2)
        net = discover(parts.train)
        params = estimate_decay_params(net, parts.train)
        train_ds = build_dataset(net, params, parts.train)
        val_ds = build_dataset(net, params, parts.validation)
        weights, history = train(train_ds, val_ds, TrainConfig(epochs=40, seed=2))
        final = roc_auc(predict_proba(weights, val_ds), val_ds.labels)
        assert final >= history[0]["val_auc"]

    def test_empty_sets_rejected(self):
        rng = np.random.RandomState(1)
        ds = toy_dataset(rng, 10)
        empty = PredictionDataset(
            samples=np.zeros((0, 12)), demographics=np.zeros((0, 6)),
            labels=np.zeros(0, dtype=int),
        )
        with pytest.raises(ValueError):
            train(ds, empty, TrainConfig(epochs=1))


class TestPredict:
    def test_empty_dataset(self):
        w = small_weights()
        empty = PredictionDataset(
            samples=np.zeros((0, 12)), demographics=np.zeros((0, 6)),
            labels=np.zeros(0, dtype=int),
        )
        assert predict_proba(w, empty).shape == (0,)

    def test_duplicated_row_duplicated_probability(self):
        w = small_weights(8)
        rng = np.random.RandomState(2)
        row_t, row_d = rng.uniform(size=12), rng.uniform(size=6)
        ds = PredictionDataset(
            samples=np.stack([row_t, row_t]),
            demographics=np.stack([row_d, row_d]),
            labels=np.array([0, 1]),
        )
        probs = predict_proba(w, ds)
        assert probs[0] == probs[1]

    def test_save_load_bit_exact(self, tmp_path):
        w = small_weights(6)
        rng = np.random.RandomState(4)
        ds = toy_dataset(rng, 20)
        path = tmp_path / "weights.npz"
        w.save(path)
        w2 = NetworkWeights.load(path)
        np.testing.assert_array_equal(predict_proba(w, ds), predict_proba(w2, ds))


class TestEncoding:
    def test_demographics_vector(self):
        vec = encode_demographics(DemographicRecord(age=64, insurance="Private"))
        np.testing.assert_array_equal(vec, [0.64, 0, 0, 1, 0, 0])
