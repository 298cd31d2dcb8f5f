import numpy as np
import pytest

from anece import closed_form as cf
from anece import linalg, metrics, model
from anece.model import assemble_pilot, power_used, validate_anece

from conftest import random_complex, random_feasible_factor


class TestDftMatrix:
    def test_values(self):
        assert np.allclose(cf.dft_matrix(2), [[1, 1], [1, -1]])

    def test_scaled_unitary(self):
        Q = cf.dft_matrix(4)
        assert np.allclose(Q @ Q.conj().T, 4 * np.eye(4))


class TestSpacedColumnSplit:
    def test_two_point(self):
        Qm, Qbar = cf.split_spaced_columns(2, 1, 0)
        assert np.allclose(Qm, [[1], [1]])
        assert np.allclose(Qbar, [[1], [-1]])

    def test_orthogonality(self):
        for M in range(2, 7):
            for N in (1, 2, 4):
                for m in range(M):
                    Qm, Qbar = cf.split_spaced_columns(M, N, m)
                    assert np.linalg.norm(Qm.conj().T @ Qbar) < 1e-12 * (M * N)

    def test_gram_band_structure(self):
        M, N, m = 3, 2, 1
        Qm, _ = cf.split_spaced_columns(M, N, m)
        G = Qm @ Qm.conj().T
        for l in range(N * M):
            for k in range(N * M):
                if abs(l - k) % N == 0:
                    expected = N * np.exp(-2j * np.pi * (l - k) * m / (N * M))
                else:
                    expected = 0.0
                assert G[l, k] == pytest.approx(expected, abs=1e-10)
        # hence only M nonzero entries per row, at offsets that are multiples of N
        for l in range(N * M):
            assert len(np.flatnonzero(np.abs(G[l]) > 1e-9)) == M

    def test_phase_ramp_factorization(self):
        for M, N, m in [(2, 1, 1), (3, 2, 0), (3, 2, 2), (4, 2, 3)]:
            Qm, _ = cf.split_spaced_columns(M, N, m)
            wM = np.exp(-2j * np.pi / M)
            q = wM ** (m * np.arange(M))
            expected = N * linalg.kron(np.outer(q, q.conj()), np.eye(N))
            assert np.linalg.norm(Qm @ Qm.conj().T - expected) < 1e-9 * (M * N)

    def test_m_out_of_range(self):
        with pytest.raises(ValueError):
            cf.split_spaced_columns(3, 2, 3)


class TestClosedFormFactor:
    def test_two_user_single_antenna(self):
        cfg = model.make_config(M=2, N=1, P=1.0, K=1)
        pf = cf.closed_form_factor(cfg)
        assert np.allclose(pf.F, [[1.0], [-1.0]])

    def test_per_user_power_exact(self):
        for rho in (0.0, 0.8):
            cfg = model.make_config(M=3, N=2, P=2.5, rho=rho)
            pf = cf.closed_form_factor(cfg)
            assert np.allclose(power_used(cfg, pf.F), cfg.K * np.array(cfg.P))

    def test_two_user_pilot_gram_identity(self):
        cfg = model.make_config(M=2, N=2, P=3.0, K=4)
        sp = assemble_pilot(cfg, cf.closed_form_factor(cfg))
        for i in range(2):
            Pi = sp.user_block(i)
            assert np.allclose(Pi @ Pi.conj().T, (cfg.kp(i) / 2) * np.eye(2), atol=1e-9)

    def test_phase_ramp_annihilates_factor(self):
        for M, N, m in [(2, 2, 0), (3, 2, 1), (4, 1, 2)]:
            cfg = model.make_config(M=M, N=N, P=1.0)
            pf = cf.closed_form_factor(cfg, m=m)
            wM = np.exp(-2j * np.pi / M)
            q = wM ** (m * np.arange(M))
            proj = linalg.kron(np.outer(q, q.conj()), np.eye(N))
            assert np.linalg.norm(proj @ pf.F) < 1e-9 * np.linalg.norm(pf.F)

    def test_objective_invariant_over_m(self):
        cfg = model.make_config(M=4, N=2, P=2.0)
        J = [metrics.user_mse(cfg, cf.closed_form_factor(cfg, m=m))[1] for m in range(4)]
        I = [metrics.sum_mi(cfg, cf.closed_form_factor(cfg, m=m))[1] for m in range(4)]
        assert np.ptp(J) < 1e-10 * abs(np.mean(J))
        assert np.ptp(I) < 1e-10 * abs(np.mean(I))

    def test_anece_conditions_hold(self):
        cfg = model.make_config(M=3, N=2, P=1.0)
        rep = validate_anece(cfg, assemble_pilot(cfg, cf.closed_form_factor(cfg)))
        assert rep.rank_total == (cfg.M - 1) * 2
        assert rep.passed

    def test_asymmetric_rejected(self):
        cfg = model.make_config(M=2, N=[1, 2], P=1.0, K=3)
        with pytest.raises(model.ConfigError):
            cf.closed_form_factor(cfg)
        cfg2 = model.make_config(M=2, N=2, P=[1.0, 2.0])
        with pytest.raises(model.ConfigError):
            cf.closed_form_factor(cfg2)


class TestBaselineFactor:
    def test_isotropic_scale(self):
        cfg = model.make_config(M=2, N=2, P=3.0)
        pf = cf.baseline_dft_factor(cfg)
        d = cfg.kp(0) / (cfg.N[0] * cfg.r)
        Qt = cf.dft_matrix(cfg.N_T)[:, : cfg.r]
        assert np.allclose(pf.F, np.sqrt(d) * Qt)

    def test_two_user_single_antenna(self):
        cfg = model.make_config(M=2, N=1, P=1.0, K=1)
        pf = cf.baseline_dft_factor(cfg)
        assert np.allclose(pf.F, [[1.0], [1.0]])
        assert np.allclose(power_used(cfg, pf.F), [1.0, 1.0])

    def test_correlated_power_met_exactly(self):
        cfg = model.make_config(M=3, N=[1, 2, 3], P=[1.0, 2.0, 3.0], rho=[0.0, 0.5, 0.8])
        pf = cf.baseline_dft_factor(cfg)
        assert np.allclose(power_used(cfg, pf.F), cfg.K * np.array(cfg.P))


class TestKktResiduals:
    def test_dft_point_stationary(self):
        cfg = model.make_config(M=3, N=2, P=5.0)
        pf = cf.closed_form_factor(cfg)
        ctx = cf.closed_form_context(cfg)
        res_mse, mu_mse = cf.kkt_residual_mse(cfg, pf)
        res_mi, mu_mi = cf.kkt_residual_mi(cfg, pf)
        assert res_mse < 1e-8 and res_mi < 1e-8
        assert np.allclose(mu_mse, ctx.mu_mse, rtol=1e-8)
        assert np.allclose(mu_mi, ctx.mu_mi, rtol=1e-8)
        assert np.all(mu_mse > 0) and np.all(mu_mi > 0)

    def test_supplied_multipliers(self):
        cfg = model.make_config(M=2, N=2, P=3.0)
        pf = cf.closed_form_factor(cfg)
        ctx = cf.closed_form_context(cfg)
        res, _ = cf.kkt_residual_mse(cfg, pf, mu=[ctx.mu_mse] * 2)
        assert res < 1e-8
        res_i, _ = cf.kkt_residual_mi(cfg, pf, mu=[ctx.mu_mi] * 2)
        assert res_i < 1e-8

    def test_random_point_not_stationary(self, rng):
        cfg = model.make_config(M=3, N=2, P=5.0)
        F = random_feasible_factor(rng, cfg)
        assert cf.kkt_residual_mse(cfg, F)[0] > 1e-3
        assert cf.kkt_residual_mi(cfg, F)[0] > 1e-3

    def test_zero_point_conventions(self):
        cfg = model.make_config(M=2, N=2, P=1.0)
        res, mu = cf.kkt_residual_mse(cfg, np.zeros((4, 2), dtype=complex))
        assert res == 0.0
        assert np.allclose(mu, 0.0)

    def test_context_gamma_window(self):
        for P in (0.01, 1.0, 1e5):
            cfg = model.make_config(M=3, N=2, P=P)
            ctx = cf.closed_form_context(cfg)
            assert 0.0 < ctx.gamma < 1.0
            assert ctx.beta > 0.0

    def test_gamma_matrices_are_scaled_identities(self):
        # at the spaced-DFT factor both covariance factors collapse to gamma * I
        from anece.metrics import _gamma_pair

        cfg = model.make_config(M=3, N=2, P=4.0)
        pf = cf.closed_form_factor(cfg, m=1)
        ctx = cf.closed_form_context(cfg, m=1)
        for (i, j) in cfg.pairs():
            G_ij, G_Tji = _gamma_pair(cfg, pf.F, i, j)
            eye = np.eye(G_ij.shape[0])
            assert np.linalg.norm(G_ij - ctx.gamma * eye) < 1e-10
            assert np.linalg.norm(G_Tji - ctx.gamma * eye) < 1e-10


class TestDeterminantOrderingBounds:
    """Kronecker-sum determinant bounds from sorted eigenvalue pairings."""

    @staticmethod
    def _random_psd(rng, n):
        A = random_complex(rng, n, n)
        return A @ A.conj().T

    def test_bounds_hold_on_random_quadruples(self, rng):
        violations = 0
        for _ in range(200):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(1, 5))
            A, C = self._random_psd(rng, n), self._random_psd(rng, n)
            B, D = self._random_psd(rng, m), self._random_psd(rng, m)
            la = np.sort(np.linalg.eigvalsh(A))[::-1]
            lb = np.sort(np.linalg.eigvalsh(B))[::-1]
            lc = np.sort(np.linalg.eigvalsh(C))[::-1]
            ld = np.sort(np.linalg.eigvalsh(D))[::-1]
            det = np.linalg.det(np.kron(A, B) + np.kron(C, D)).real
            lower = np.prod(np.kron(la, lb) + np.kron(lc, ld))
            upper = np.prod(np.kron(la, lb) + np.kron(lc[::-1], ld[::-1]))
            scale = max(abs(det), abs(lower), abs(upper), 1e-300)
            if det < lower - 1e-10 * scale or det > upper + 1e-10 * scale:
                violations += 1
        assert violations == 0
