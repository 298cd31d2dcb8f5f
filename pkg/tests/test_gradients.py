import numpy as np
import pytest

from anece import gradients, metrics, model
from anece.closed_form import closed_form_factor, closed_form_context

from conftest import random_feasible_factor


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


class TestSumMseGradient:
    def test_zero_point_stationary(self):
        cfg = model.make_config(M=2, N=2, P=1.0)
        res = gradients.grad_sum_mse(cfg, np.zeros((4, 2), dtype=complex))
        assert np.allclose(res.G, 0.0)

    def test_dft_point_collinear(self):
        cfg = model.make_config(M=3, N=2, P=4.0)
        pf = closed_form_factor(cfg)
        ctx = closed_form_context(cfg)
        res = gradients.grad_sum_mse(cfg, pf.F)
        expected = -2.0 * ctx.mu_mse * pf.F
        assert rel_err(res.G, expected) < 1e-10
        coef = np.vdot(pf.F, res.G).real / np.linalg.norm(pf.F) ** 2
        assert np.linalg.norm(res.G - coef * pf.F) / np.linalg.norm(res.G) < 1e-8

    def test_finite_difference(self, rng):
        cfg = model.make_config(M=2, N=2, P=2.0, rho=0.5)
        F = random_feasible_factor(rng, cfg)
        fd = gradients.finite_difference(
            lambda X: gradients.grad_sum_mse(cfg, X).value, F)
        assert rel_err(gradients.grad_sum_mse(cfg, F).G, fd) < 1e-5


class TestPowerBarrierGradient:
    def test_zero_point(self):
        cfg = model.make_config(M=2, N=2, P=1.0)
        res = gradients.grad_power_barrier(cfg, np.zeros((4, 2), dtype=complex), 0)
        assert np.allclose(res.G, 0.0)

    def test_norm_diverges_at_boundary(self, rng):
        cfg = model.make_config(M=2, N=2, P=1.0)
        norms = []
        for margin in (0.9, 0.99, 0.999):
            F = random_feasible_factor(rng, cfg, margin)
            norms.append(np.linalg.norm(gradients.grad_power_barrier(cfg, F, 0).G))
        assert norms[0] < norms[1] < norms[2]

    def test_infeasible_rejected(self, rng):
        cfg = model.make_config(M=2, N=2, P=1.0)
        F = random_feasible_factor(rng, cfg, margin=1.5)
        with pytest.raises(gradients.InfeasibleError):
            gradients.grad_power_barrier(cfg, F, 0)

    def test_finite_difference(self, rng):
        cfg = model.make_config(M=2, N=2, P=2.0, rho=0.5)
        F = random_feasible_factor(rng, cfg)
        for i in range(cfg.M):
            fd = gradients.finite_difference(
                lambda X: gradients.grad_power_barrier(cfg, X, i).value, F)
            assert rel_err(gradients.grad_power_barrier(cfg, F, i).G, fd) < 1e-5


class TestSumMiGradient:
    def test_zero_point_stationary(self):
        cfg = model.make_config(M=3, N=1, P=1.0)
        res = gradients.grad_sum_mi(cfg, np.zeros((3, 2), dtype=complex))
        assert np.allclose(res.G, 0.0)

    def test_dft_point_collinear(self):
        cfg = model.make_config(M=3, N=2, P=4.0)
        pf = closed_form_factor(cfg)
        ctx = closed_form_context(cfg)
        res = gradients.grad_sum_mi(cfg, pf.F)
        assert rel_err(res.G, 2.0 * ctx.mu_mi * pf.F) < 1e-10

    def test_finite_difference(self, rng):
        cfg = model.make_config(M=3, N=2, P=1.5, rho=0.5)
        F = random_feasible_factor(rng, cfg)
        fd = gradients.finite_difference(
            lambda X: gradients.grad_sum_mi(cfg, X).value, F)
        assert rel_err(gradients.grad_sum_mi(cfg, F).G, fd) < 1e-4

    def test_value_matches_metrics(self, rng):
        cfg = model.make_config(M=3, N=2, P=1.5, rho=0.3)
        F = random_feasible_factor(rng, cfg)
        assert gradients.grad_sum_mi(cfg, F).value \
            == pytest.approx(metrics.sum_mi(cfg, F)[1], rel=1e-12)


class TestFairnessGradient:
    def test_large_eps_asymptotics(self, rng):
        cfg = model.make_config(M=3, N=2, P=1.0)
        F = random_feasible_factor(rng, cfg)
        mse = metrics.user_mse(cfg, F)[0]
        eps = 1e6 * mse.max()
        t = 2.0
        res = gradients.grad_fairness(cfg, F, eps, "mse", t=t)
        # far from the constraints, each barrier contributes roughly -1/eps
        assert res.d_eps == pytest.approx(t - cfg.M / eps, rel=1e-3)

    def test_binding_constraint_dominates(self, rng):
        cfg = model.make_config(M=3, N=2, P=1.0)
        F = random_feasible_factor(rng, cfg)
        mse = metrics.user_mse(cfg, F)[0]
        eps = mse.max() * (1 + 1e-6)
        res = gradients.grad_fairness(cfg, F, eps, "mse", t=1.0)
        assert res.d_eps < -1e4  # the single tight barrier term takes over

    def test_infeasible_eps_rejected(self, rng):
        cfg = model.make_config(M=3, N=2, P=1.0)
        F = random_feasible_factor(rng, cfg)
        eps = 0.5 * metrics.user_mse(cfg, F)[0].max()
        with pytest.raises(gradients.InfeasibleError):
            gradients.grad_fairness(cfg, F, eps, "mse")

    @pytest.mark.parametrize("mode", ["mse", "mi"])
    def test_joint_finite_difference(self, rng, mode):
        cfg = model.make_config(M=3, N=2, P=1.5, rho=0.3)
        F = random_feasible_factor(rng, cfg)
        if mode == "mse":
            eps = 1.5 * metrics.user_mse(cfg, F)[0].max()
        else:
            eps = -0.5 * min(metrics.sum_mi(cfg, F)[0].values())
        t = 3.0
        res = gradients.grad_fairness(cfg, F, eps, mode, t=t)
        fd_F = gradients.finite_difference(
            lambda X: gradients.grad_fairness(cfg, X, eps, mode, t=t).value, F)
        assert rel_err(res.G, fd_F) < 1e-5
        h = 1e-6 * max(abs(eps), 1.0)
        fd_eps = (gradients.grad_fairness(cfg, F, eps + h, mode, t=t).value
                  - gradients.grad_fairness(cfg, F, eps - h, mode, t=t).value) / (2 * h)
        assert abs(res.d_eps - fd_eps) / abs(fd_eps) < 1e-5


class TestDescentConsistency:
    def test_small_step_reduces_barrier_objective(self, rng):
        cfg = model.make_config(M=3, N=2, P=1.5, rho=0.4)
        for _ in range(3):
            F = random_feasible_factor(rng, cfg, margin=0.7)
            t = 5.0

            def g1(X):
                val = t * gradients.grad_sum_mse(cfg, X).value
                for i in range(cfg.M):
                    val += gradients.grad_power_barrier(cfg, X, i).value
                return val

            G = t * gradients.grad_sum_mse(cfg, F).G
            for i in range(cfg.M):
                G += gradients.grad_power_barrier(cfg, F, i).G
            step = 1e-6 / max(np.linalg.norm(G), 1.0)
            assert g1(F - step * G) < g1(F)

    def test_small_step_increases_mi(self, rng):
        cfg = model.make_config(M=2, N=2, P=1.0, rho=0.3)
        F = random_feasible_factor(rng, cfg, margin=0.5)
        res = gradients.grad_sum_mi(cfg, F)
        step = 1e-6 / max(np.linalg.norm(res.G), 1.0)
        assert gradients.grad_sum_mi(cfg, F + step * res.G).value > res.value
