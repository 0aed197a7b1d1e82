import math

import numpy as np
import pytest

from awt.attacks import AttackConfig, eval_attack_config
from awt.data import blobs, xor_dataset
from awt.network import MlpSpec, init_params, magnitude_mask
from awt.numerics import make_rng
from awt.training import (TrainConfig, accuracy, adversarial_train, evaluate,
                          natural_train, predictions, train_attack_config)


class TestTrainConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(loss="hinge")
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)

    def test_train_attack_defaults(self):
        cfg = train_attack_config(0.3)
        assert cfg.steps == 40
        assert cfg.step_size == pytest.approx(2.5 * 0.3 / 40)
        assert cfg.random_start


class TestNaturalTrain:
    def test_convex_monotone(self):
        # single linear neuron, full batch, squared loss, small lr
        spec = MlpSpec([2, 1])
        rng = make_rng(0)
        X = rng.normal(size=(32, 2))
        w_true = np.array([1.0, -2.0])
        Y = (X @ w_true)[:, None]
        cfg = TrainConfig(loss="squared", optimizer="sgd", learning_rate=0.05,
                          epochs=30, batch_size=32, seed=0)
        theta0 = init_params(spec, rng)
        _, trace = natural_train(spec, theta0, None, (X, Y), cfg)
        losses = trace.values("train_loss")
        assert all(a >= b - 1e-12 for a, b in zip(losses, losses[1:]))

    def test_determinism(self):
        spec = MlpSpec([3, 5, 2])
        rng = make_rng(1)
        X = rng.normal(size=(20, 3))
        y = rng.integers(0, 2, size=20)
        cfg = TrainConfig(epochs=3, batch_size=8, seed=4)
        theta0 = init_params(spec, rng)
        t1, _ = natural_train(spec, theta0, None, (X, y), cfg)
        t2, _ = natural_train(spec, theta0, None, (X, y), cfg)
        np.testing.assert_array_equal(t1, t2)

    def test_xor(self):
        X, y = xor_dataset()
        y_pm = 2.0 * y - 1.0  # single-output nets predict sign in {-1, +1}
        spec = MlpSpec([2, 8, 1])
        theta0 = init_params(spec, make_rng(3))
        cfg = TrainConfig(loss="squared", optimizer="adam", learning_rate=1e-2,
                          epochs=2000, batch_size=4, seed=3)
        theta, _ = natural_train(spec, theta0, None, (X, y_pm[:, None]), cfg)
        assert accuracy(spec, theta, X, y_pm) == 1.0

    def test_rejects_attack(self):
        cfg = TrainConfig(attack=train_attack_config(0.1))
        with pytest.raises(ValueError):
            natural_train(MlpSpec([2, 1]), np.zeros(3), None,
                          (np.zeros((1, 2)), np.zeros((1, 1))), cfg)


class TestAdversarialTrain:
    def test_eps_zero_reduces_to_natural(self):
        spec = MlpSpec([3, 4, 2])
        rng = make_rng(5)
        X = rng.normal(size=(16, 3))
        y = rng.integers(0, 2, size=16)
        theta0 = init_params(spec, rng)
        atk = AttackConfig(norm_order=math.inf, epsilon=0.0, steps=1,
                           step_size=0.1)
        nat = TrainConfig(epochs=4, batch_size=8, seed=6)
        adv = TrainConfig(epochs=4, batch_size=8, seed=6, attack=atk)
        t_nat, _ = natural_train(spec, theta0, None, (X, y), nat)
        t_adv, _ = adversarial_train(spec, theta0, None, (X, y), adv)
        np.testing.assert_array_equal(t_nat, t_adv)

    def test_separable_blobs(self):
        X, y = blobs(100, seed=7)
        spec = MlpSpec([2, 8, 2])
        theta0 = init_params(spec, make_rng(7))
        cfg = TrainConfig(epochs=50, batch_size=16, seed=7,
                          attack=train_attack_config(0.05, steps=5,
                                                     clip_box=None))
        theta, trace = adversarial_train(spec, theta0, None, (X, y), cfg)
        assert accuracy(spec, theta, X, y) == 1.0
        assert "robust_acc" in trace.metric_names

    def test_mask_preserved(self):
        spec = MlpSpec([3, 6, 2])
        rng = make_rng(8)
        theta0 = init_params(spec, rng)
        mask = magnitude_mask(spec, theta0, 0.4)
        X = rng.normal(size=(12, 3))
        y = rng.integers(0, 2, size=12)
        cfg = TrainConfig(epochs=3, batch_size=4, seed=8,
                          attack=train_attack_config(0.1, steps=3,
                                                     clip_box=None))
        theta, _ = adversarial_train(spec, theta0 * mask, mask, (X, y), cfg)
        assert np.all(theta[mask == 0.0] == 0.0)

    def test_rejects_missing_attack(self):
        with pytest.raises(ValueError):
            adversarial_train(MlpSpec([2, 1]), np.zeros(3), None,
                              (np.zeros((1, 2)), np.zeros((1, 1))),
                              TrainConfig())


class TestEvaluate:
    def test_eps_zero_robust_equals_clean(self):
        spec = MlpSpec([3, 4, 2])
        rng = make_rng(9)
        theta = init_params(spec, rng)
        X = rng.normal(size=(10, 3))
        y = rng.integers(0, 2, size=10)
        clean, robust = evaluate(spec, theta, None, (X, y),
                                 attack=eval_attack_config(0.0, clip_box=None))
        assert robust == clean

    def test_constant_correct(self):
        spec = MlpSpec([2, 2])
        # constant logits [1, 0]: always predicts class 0
        theta = spec.pack([(np.zeros((2, 2)), np.array([1.0, 0.0]))])
        X = make_rng(10).normal(size=(5, 2))
        clean, _ = evaluate(spec, theta, None, (X, np.zeros(5, dtype=int)))
        assert clean == 1.0

    def test_naive_loop_oracle(self):
        spec = MlpSpec([3, 5, 4])
        rng = make_rng(11)
        theta = init_params(spec, rng)
        X = rng.normal(size=(20, 3))
        y = rng.integers(0, 4, size=20)
        clean, _ = evaluate(spec, theta, None, (X, y))
        hits = 0
        from awt.network import forward
        for i in range(20):
            f = forward(spec, theta, X[i])
            pred = int(np.argmax(f))  # ties go to the lowest index
            hits += int(pred == y[i])
        assert clean == hits / 20

    def test_argmax_tie_lowest_index(self):
        spec = MlpSpec([2, 3])
        theta = np.zeros(spec.num_params)  # all outputs equal
        p = predictions(spec, theta, np.ones((4, 2)))
        np.testing.assert_array_equal(p, 0)

    def test_sign_predictions_single_output(self):
        spec = MlpSpec([2, 1])
        theta = spec.pack([(np.array([[1.0, 0.0]]), np.array([0.0]))])
        p = predictions(spec, theta, np.array([[2.0, 0.0], [-2.0, 0.0],
                                               [0.0, 0.0]]))
        np.testing.assert_array_equal(p, [1, -1, -1])
