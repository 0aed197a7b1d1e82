import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from awt.network import (MlpSpec, batch_backprop, forward, init_params,
                         jacobian, loss_and_grads, magnitude_mask,
                         mask_density, topk_mask)
from awt.numerics import make_rng
from helpers import fd_grad, rel_err


class TestMlpSpec:
    def test_param_count(self):
        assert MlpSpec([4, 3, 2]).num_params == (4 * 3 + 3) + (3 * 2 + 2)

    def test_invalid_sizes(self):
        with pytest.raises(ValueError):
            MlpSpec([4])
        with pytest.raises(ValueError):
            MlpSpec([4, 0, 2])


class TestInit:
    def test_deterministic(self):
        spec = MlpSpec([5, 4, 3])
        np.testing.assert_array_equal(init_params(spec, make_rng(1)),
                                      init_params(spec, make_rng(1)))

    def test_he_variance(self):
        spec = MlpSpec([784, 300])
        theta = init_params(spec, make_rng(0))
        w = theta[spec.weight_coords()]
        assert w.size >= 1e5
        assert np.var(w) == pytest.approx(2.0 / 784, rel=0.2)

    def test_biases_zero(self):
        spec = MlpSpec([5, 4, 3])
        theta = init_params(spec, make_rng(0))
        assert np.all(theta[~spec.weight_coords()] == 0.0)


class TestForward:
    def test_identity_single_layer(self):
        spec = MlpSpec([3, 3])
        theta = spec.pack([(np.eye(3), np.zeros(3))])
        x = np.array([0.3, -1.2, 2.0])
        np.testing.assert_array_equal(forward(spec, theta, x), x)

    def test_all_ones_mask_bitwise(self):
        spec = MlpSpec([4, 5, 2])
        theta = init_params(spec, make_rng(2))
        x = make_rng(3).normal(size=4)
        np.testing.assert_array_equal(
            forward(spec, theta, x),
            forward(spec, theta, x, mask=np.ones(spec.num_params)))

    def test_hand_calculated_221(self):
        # W1 = [[1, -1], [0.5, 0.5]], b1 = [0, -0.2]; W2 = [[2, -1]], b2 = [0.1]
        spec = MlpSpec([2, 2, 1])
        theta = spec.pack([(np.array([[1.0, -1.0], [0.5, 0.5]]),
                            np.array([0.0, -0.2])),
                           (np.array([[2.0, -1.0]]), np.array([0.1]))])
        x = np.array([0.4, 0.1])
        # z1 = [0.3, 0.05], relu keeps both; out = 2*0.3 - 1*0.05 + 0.1 = 0.65
        assert forward(spec, theta, x)[0] == pytest.approx(0.65, abs=1e-12)

    def test_masked_equals_densified(self):
        spec = MlpSpec([4, 6, 3])
        theta = init_params(spec, make_rng(4))
        mask = magnitude_mask(spec, theta, 0.5)
        X = make_rng(5).normal(size=(7, 4))
        np.testing.assert_array_equal(forward(spec, theta, X, mask=mask),
                                      forward(spec, theta * mask, X))

    def test_dimension_mismatch(self):
        spec = MlpSpec([3, 2])
        theta = init_params(spec, make_rng(0))
        with pytest.raises(ValueError):
            forward(spec, theta, np.zeros(4))


class TestLossAndGrads:
    def test_linear_model_hand_values(self):
        spec = MlpSpec([1, 1])
        theta = np.array([1.0, 0.0])  # f(x) = x
        loss, gp, gx = loss_and_grads(spec, theta, np.array([0.0]),
                                      np.array([1.0]), "squared")
        assert loss == pytest.approx(0.5)
        np.testing.assert_allclose(gx, [-1.0])

    def test_zero_grad_at_fit(self):
        spec = MlpSpec([2, 3, 1])
        theta = init_params(spec, make_rng(6))
        x = np.array([0.5, -0.3])
        y = forward(spec, theta, x)
        _, gp, _ = loss_and_grads(spec, theta, x, y, "squared")
        np.testing.assert_allclose(gp, 0.0, atol=1e-14)

    @pytest.mark.parametrize("kind", ["squared", "cross_entropy"])
    @pytest.mark.parametrize("sizes", [[3, 4, 2], [2, 5, 5, 3], [4, 3]])
    def test_param_grad_finite_difference(self, kind, sizes):
        spec = MlpSpec(sizes)
        rng = make_rng(hash((kind, tuple(sizes))) % 2**31)
        theta = init_params(spec, rng)
        theta[~spec.weight_coords()] = 0.1 * rng.normal(size=spec.num_params - spec.num_weights)
        X = rng.normal(size=(3, sizes[0]))
        if kind == "squared":
            y = rng.normal(size=(3, sizes[-1]))
        else:
            y = rng.integers(0, sizes[-1], size=3)
        _, grad, _ = batch_backprop(spec, theta, X, y, kind)
        ref = fd_grad(lambda t: batch_backprop(spec, t, X, y, kind)[0], theta)
        assert rel_err(grad, ref) < 1e-6

    def test_input_grad_finite_difference(self):
        spec = MlpSpec([4, 5, 2])
        rng = make_rng(9)
        theta = init_params(spec, rng)
        x = rng.normal(size=4)
        y = rng.normal(size=2)
        _, _, gx = loss_and_grads(spec, theta, x, y, "squared")
        ref = fd_grad(lambda v: loss_and_grads(spec, theta, v, y, "squared")[0], x)
        assert rel_err(gx, ref) < 1e-6

    def test_masked_coordinates_zero(self):
        spec = MlpSpec([3, 4, 2])
        rng = make_rng(10)
        theta = init_params(spec, rng)
        mask = magnitude_mask(spec, theta, 0.5)
        _, grad, _ = batch_backprop(spec, theta, rng.normal(size=(2, 3)),
                                    rng.normal(size=(2, 2)), "squared", mask)
        assert np.all(grad[mask == 0.0] == 0.0)

    def test_cross_entropy_rows_sum_zero(self):
        from awt.network import loss_gradient
        rng = make_rng(11)
        F = rng.normal(size=(6, 5))
        y = rng.integers(0, 5, size=6)
        _, dF = loss_gradient(F, y, "cross_entropy")
        np.testing.assert_allclose(dF.sum(axis=1), 0.0, atol=1e-10)

    def test_unknown_loss_kind(self):
        spec = MlpSpec([2, 1])
        with pytest.raises(ValueError):
            loss_and_grads(spec, np.zeros(3), np.zeros(2), np.zeros(1), "hinge")


class TestJacobian:
    def test_linear_model(self):
        spec = MlpSpec([3, 2])
        theta = init_params(spec, make_rng(12))
        X = make_rng(13).normal(size=(2, 3))
        J = jacobian(spec, theta, X)
        # df_a(x)/dW_{aj} = x_j, df_a/db_a = 1
        for i in range(2):
            for a in range(2):
                row = J[i * 2 + a]
                W = row[:6].reshape(2, 3)
                np.testing.assert_allclose(W[a], X[i], atol=1e-14)
                assert np.all(W[1 - a] == 0.0)
                np.testing.assert_allclose(row[6:], np.eye(2)[a], atol=1e-14)

    def test_finite_difference(self):
        spec = MlpSpec([3, 6, 2])
        rng = make_rng(14)
        theta = init_params(spec, rng)
        X = rng.normal(size=(3, 3))
        J = jacobian(spec, theta, X)
        from helpers import fd_jacobian
        ref = fd_jacobian(lambda t: forward(spec, t, X).ravel(), theta)
        assert rel_err(J, ref) < 1e-5

    def test_mask_zero_columns(self):
        spec = MlpSpec([3, 4, 2])
        rng = make_rng(15)
        theta = init_params(spec, rng)
        mask = magnitude_mask(spec, theta, 0.3)
        J = jacobian(spec, theta, rng.normal(size=(2, 3)), mask=mask)
        assert np.all(J[:, mask == 0.0] == 0.0)

    def test_jacobian_gradient_consistency(self):
        spec = MlpSpec([3, 5, 2])
        rng = make_rng(16)
        theta = init_params(spec, rng)
        x = rng.normal(size=3)
        y = rng.normal(size=2)
        _, grad, _ = loss_and_grads(spec, theta, x, y, "squared")
        J = jacobian(spec, theta, x[None, :])
        resid = forward(spec, theta, x) - y
        np.testing.assert_allclose(grad, J.T @ resid, atol=1e-10)


class TestTopkMask:
    def test_top2(self):
        np.testing.assert_array_equal(
            topk_mask(np.array([0.1, 0.5, -0.9, 0.2]), 0.5), [0, 1, 1, 0])

    def test_full_density(self):
        np.testing.assert_array_equal(topk_mask(np.array([1.0, -2.0]), 1.0),
                                      [1, 1])

    def test_tie_break_smaller_index(self):
        np.testing.assert_array_equal(topk_mask(np.array([0.3, 0.3]), 0.5),
                                      [1, 0])

    def test_invalid_density(self):
        with pytest.raises(ValueError):
            topk_mask(np.array([1.0]), 0.0)

    def test_biases_never_pruned(self):
        spec = MlpSpec([3, 4, 2])
        theta = init_params(spec, make_rng(17))
        mask = magnitude_mask(spec, theta, 0.1)
        assert np.all(mask[~spec.weight_coords()] == 1.0)

    @given(st.integers(0, 2**31 - 1), st.floats(0.01, 1.0))
    @settings(max_examples=25, deadline=None)
    def test_exact_density(self, seed, rho):
        spec = MlpSpec([5, 7, 3])
        theta = init_params(spec, make_rng(seed))
        mask = magnitude_mask(spec, theta, rho)
        kept = mask[spec.weight_coords()].sum()
        assert kept == round(rho * spec.num_weights)
        assert mask_density(spec, mask) == pytest.approx(kept / spec.num_weights)
