import math

import numpy as np
import pytest

from awt.analysis import (DerivativeBounds, GaussianToySpec,
                          _bounds_from_jacobian_fn, check_lemma_bound,
                          check_theorem_bound, closed_form_adv_acc,
                          closed_form_clean_acc, estimate_derivative_bounds,
                          input_jacobian, linear_robust_accuracy)
from awt.network import MlpSpec, init_params
from awt.numerics import make_rng, std_normal_cdf


class TestDerivativeBounds:
    def test_linear_model_exact(self):
        spec = MlpSpec([3, 1])
        w = np.array([1.0, -2.0, 0.5])
        theta = np.concatenate([w, [0.3]])
        X = make_rng(0).normal(size=(5, 3))
        b = estimate_derivative_bounds(spec, theta, X, p=math.inf, epsilon=0.1)
        assert b.q == 1
        assert b.c1 == pytest.approx(np.abs(w).sum(), rel=1e-12)
        assert b.c2 == pytest.approx(0.0, abs=1e-8)
        assert b.cq == pytest.approx(b.c1 + 0.1 * b.c2)

    def test_quadratic_analytic(self):
        # f(x) = x^2 / 2 in 1-D: df/dx = x, so C1 = max |x| = 2 on samples
        # with |x| <= 2 and C2 = 1 (constant second derivative).
        X = np.linspace(-2, 2, 9)[:, None]
        jac = lambda pts: np.asarray(pts)[:, None, :]  # df/dx = x
        b = _bounds_from_jacobian_fn(jac, X, p=math.inf, epsilon=0.5,
                                     directions=8, fd_step=1e-4, seed=0)
        assert b.c1 == pytest.approx(2.0, rel=1e-12)
        assert b.c2 == pytest.approx(1.0, rel=1e-6)

    def test_monotone_in_samples(self):
        spec = MlpSpec([4, 6, 2])
        rng = make_rng(1)
        theta = init_params(spec, rng)
        X = rng.normal(size=(10, 4))
        small = estimate_derivative_bounds(spec, theta, X[:5], math.inf, 0.1)
        large = estimate_derivative_bounds(spec, theta, X, math.inf, 0.1)
        assert large.c1 >= small.c1
        assert large.c2 >= small.c2

    def test_empty_samples(self):
        spec = MlpSpec([2, 1])
        with pytest.raises(ValueError):
            estimate_derivative_bounds(spec, np.zeros(3),
                                       np.zeros((0, 2)), math.inf, 0.1)

    def test_input_jacobian_finite_difference(self):
        from awt.network import forward
        from helpers import fd_jacobian, rel_err
        spec = MlpSpec([3, 5, 2])
        rng = make_rng(2)
        theta = init_params(spec, rng)
        x = rng.normal(size=3)
        J = input_jacobian(spec, theta, x[None, :])[0]
        ref = fd_jacobian(lambda v: forward(spec, theta, v), x)
        assert rel_err(J, ref) < 1e-6


class TestLemmaBound:
    def test_eps_zero(self):
        spec = MlpSpec([2, 3, 1])
        theta = init_params(spec, make_rng(3))
        X = make_rng(4).normal(size=(4, 2))
        b = estimate_derivative_bounds(spec, theta, X, math.inf, 0.0)
        rep = check_lemma_bound(spec, theta, X, X, b, epsilon=0.0)
        assert rep.max_deviation == 0.0
        assert rep.bound == 0.0
        assert rep.holds

    def test_linear_one_step_slack_two(self):
        # Linear model, one-step l-inf attack with delta = eps: the output
        # moves by exactly eps*||w||_1, half of the 2*eps*C1 bound.
        from awt.attacks import AttackConfig, iterative_attack
        spec = MlpSpec([3, 1])
        w = np.array([1.0, -0.5, 2.0])
        theta = np.concatenate([w, [0.0]])
        X = make_rng(5).normal(size=(6, 3))
        Y = np.zeros((6, 1))
        eps = 0.2
        atk = AttackConfig(norm_order=math.inf, epsilon=eps, steps=1,
                           step_size=eps)
        Xt = iterative_attack(spec, theta, X, Y, "squared", atk)
        b = estimate_derivative_bounds(spec, theta, X, math.inf, eps)
        rep = check_lemma_bound(spec, theta, X, Xt, b, eps, attack=atk)
        assert rep.precondition_ok
        assert rep.holds
        assert rep.max_deviation == pytest.approx(eps * np.abs(w).sum(),
                                                  rel=1e-9)
        assert rep.bound == pytest.approx(2 * rep.max_deviation, rel=1e-6)

    def test_precondition_flagged(self):
        from awt.attacks import AttackConfig
        spec = MlpSpec([2, 1])
        theta = np.array([1.0, 1.0, 0.0])
        X = np.zeros((1, 2))
        bad = AttackConfig(norm_order=math.inf, epsilon=0.1, steps=100,
                           step_size=0.1)
        b = DerivativeBounds(c1=1.0, c2=0.0, epsilon=0.1, q=1, sample_count=1)
        rep = check_lemma_bound(spec, theta, X, X, b, 0.1, attack=bad)
        assert not rep.precondition_ok


class TestTheoremBound:
    def test_identical_runs(self):
        outs = [np.ones((4, 2)), 2 * np.ones((4, 2))]
        b = DerivativeBounds(c1=0.0, c2=0.0, epsilon=0.0, q=1, sample_count=4)
        rep = check_theorem_bound(outs, outs, alpha=0.0, epsilon=0.0, bounds=b)
        assert rep.holds
        assert rep.stop_time == 2
        assert all(lhs == 0.0 for _, lhs, _ in rep.records)

    def test_rhs_monotone_in_alpha(self):
        outs_d = [np.ones((3, 1))]
        outs_s = [np.zeros((3, 1))]
        b = DerivativeBounds(c1=1.0, c2=0.5, epsilon=0.1, q=1, sample_count=3)
        r1 = check_theorem_bound(outs_d, outs_s, 0.5, 0.1, b)
        r2 = check_theorem_bound(outs_d, outs_s, 1.0, 0.1, b)
        assert r2.records[0][2] >= r1.records[0][2]

    def test_length_mismatch(self):
        b = DerivativeBounds(c1=0, c2=0, epsilon=0, q=1, sample_count=1)
        with pytest.raises(ValueError):
            check_theorem_bound([np.ones((1, 1))], [], 0.0, 0.0, b)


class TestClosedForms:
    def test_bayes_value(self):
        toy = GaussianToySpec()
        assert closed_form_adv_acc(toy.mu, toy) == pytest.approx(0.8427,
                                                                 abs=5e-4)

    def test_deflected_value(self):
        # direction at cosine 0.850 to mu
        toy = GaussianToySpec()
        c = 0.850
        theta = np.zeros(100)
        theta[0] = 3 * c
        theta[1] = 3 * math.sqrt(1 - c * c)
        assert closed_form_adv_acc(theta, toy) == pytest.approx(0.7142,
                                                                abs=5e-4)

    def test_scale_invariance(self):
        toy = GaussianToySpec()
        rng = make_rng(6)
        theta = rng.normal(size=100)
        a = closed_form_adv_acc(theta, toy)
        assert closed_form_adv_acc(3.7 * theta, toy) == pytest.approx(a,
                                                                      rel=1e-12)

    def test_zero_direction_rejected(self):
        toy = GaussianToySpec()
        with pytest.raises(ValueError):
            closed_form_adv_acc(np.zeros(100), toy)
        with pytest.raises(ValueError):
            closed_form_clean_acc(np.zeros(100), toy)

    def test_maximized_at_mu(self):
        toy = GaussianToySpec()
        best = closed_form_adv_acc(toy.mu, toy)
        rng = make_rng(7)
        for _ in range(50):
            assert closed_form_adv_acc(rng.normal(size=100), toy) <= best

    def test_clean_acc(self):
        toy = GaussianToySpec()
        assert closed_form_clean_acc(toy.mu, toy) == \
            pytest.approx(std_normal_cdf(3.0))


class TestLinearRobustAccuracy:
    def test_monte_carlo_matches_closed_form(self):
        # The closed form adds the classifier's own misclassification mass
        # p_m = 1 - Phi(a) to the post-attack term, so Monte-Carlo agreement
        # is only expected where p_m is negligible: directions close to mu,
        # like every classifier in the experiment's table.
        toy = GaussianToySpec(seed=11)
        X, y = toy.sample(stream=0)
        rng = make_rng(8)
        for _ in range(3):
            theta = 0.1 * rng.normal(size=100)
            theta[0] = 3.0
            mc = linear_robust_accuracy(theta, 0.0, X, y, toy.epsilon)
            cf = closed_form_adv_acc(theta, toy)
            assert abs(mc - cf) <= 2.0 / math.sqrt(toy.n_samples)

    def test_exact_margin_rule(self):
        w = np.array([1.0, 0.0])
        X = np.array([[1.5, 0.0], [0.5, 0.0], [-2.0, 0.0]])
        y = np.array([1.0, 1.0, -1.0])
        # margins 1.5, 0.5, 2.0 against eps*||w|| = 1
        assert linear_robust_accuracy(w, 0.0, X, y, 1.0) == \
            pytest.approx(2 / 3)
