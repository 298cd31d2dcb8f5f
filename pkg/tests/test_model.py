import json

import numpy as np
import pytest

from anece import linalg, model
from anece.closed_form import closed_form_factor

from conftest import random_complex, random_feasible_factor


class TestExpCorrelation:
    def test_zero_is_identity(self):
        assert np.allclose(model.exp_correlation(2, 0.0), np.eye(2))

    def test_direct_formula(self):
        R = model.exp_correlation(2, 0.5)
        assert np.allclose(R, [[1.0, 0.5], [0.5, 1.0]])

    def test_pd_unit_trace_average(self):
        R = model.exp_correlation(3, 0.8)
        _, lam = linalg.hermitian_evd(R)
        assert np.all(lam > 0)
        assert np.trace(R).real == pytest.approx(3.0)

    def test_rejects_unit_coefficient(self):
        with pytest.raises(model.ConfigError):
            model.exp_correlation(3, 1.0)


class TestNetworkConfig:
    def test_rank_window_enforced(self):
        with pytest.raises(model.ConfigError):
            model.make_config(M=2, N=2, P=1.0, r=4)  # r must be <= N_T - 1
        with pytest.raises(model.ConfigError):
            model.make_config(M=2, N=2, P=1.0, r=1)  # r must be >= N_T - min(N)

    def test_k_at_least_r(self):
        with pytest.raises(model.ConfigError):
            model.make_config(M=2, N=2, P=1.0, K=1)

    def test_db_power(self):
        cfg = model.make_config(M=2, N=1, KP_dB=10, K=5)
        assert cfg.K * cfg.P[0] == pytest.approx(10.0)

    def test_unit_eigenvalue_average(self):
        bad = np.diag([2.0, 2.0]).astype(complex)  # trace 4 != N=2
        with pytest.raises(model.ConfigError):
            model.make_config(M=2, N=2, P=1.0, R=[bad, bad])

    def test_json_round_trip(self, tmp_path):
        doc = {"M": 3, "N": [2, 2, 2], "KP_dB": 20, "sigma2": [1.0, 0.6, 0.1], "rho": 0.4}
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(doc))
        cfg = model.load_config(path)
        assert cfg.M == 3 and cfg.r == 4 and cfg.K == 4
        assert cfg.sigma2 == (1.0, 0.6, 0.1)
        assert np.allclose(cfg.R[1], model.exp_correlation(2, 0.4))

    def test_rejects_unknown_keys(self):
        with pytest.raises(model.ConfigError):
            model.config_from_dict({"M": 2, "N": 1, "P": 1.0, "bogus": 3})


class TestSelection:
    def test_two_single_antenna_users(self):
        cfg = model.make_config(M=2, N=1, P=1.0)
        S1, Sbar1 = model.selection(cfg, 0)
        assert np.allclose(S1, [[1.0, 0.0]])
        assert np.allclose(Sbar1, [[0.0, 1.0]])

    def test_partition_of_identity(self):
        cfg = model.make_config(M=3, N=[1, 2, 3], P=1.0)
        total = sum(model.selection(cfg, i)[0].T @ model.selection(cfg, i)[0]
                    for i in range(3))
        assert np.allclose(total, np.eye(cfg.N_T))

    def test_complement_structure(self):
        cfg = model.make_config(M=3, N=2, P=1.0)
        for i in range(3):
            _, Sbar = model.selection(cfg, i)
            D = Sbar.T @ Sbar
            expected = np.eye(cfg.N_T)
            expected[cfg.block(i), cfg.block(i)] = 0.0
            assert np.allclose(D, expected)

    def test_out_of_range(self):
        cfg = model.make_config(M=2, N=1, P=1.0)
        with pytest.raises(IndexError):
            model.selection(cfg, 2)
        with pytest.raises(IndexError):
            cfg.others(-1)


class TestPilotAssembly:
    def test_identity_correlation_case(self, rng):
        cfg = model.make_config(M=2, N=2, P=1.0, K=6)
        F = np.zeros((4, 2), dtype=complex)
        F[:2, :2] = np.eye(2)
        F[2:, :2] = np.eye(2)
        V = model.default_pilot_basis(cfg.r, cfg.K)
        sp = model.assemble_pilot(cfg, model.PilotFactor(F=F, V=V))
        assert np.allclose(sp.P, F.conj() @ V.conj())

    def test_power_identity(self, rng):
        cfg = model.make_config(M=3, N=2, P=2.0, rho=0.6, K=7)
        F = random_complex(rng, cfg.N_T, cfg.r)
        sp = model.assemble_pilot(cfg, model.PilotFactor(
            F=F, V=model.default_pilot_basis(cfg.r, cfg.K)))
        for i in range(cfg.M):
            Pi = sp.user_block(i)
            assert np.trace(Pi @ Pi.conj().T).real == pytest.approx(
                model.power_used(cfg, F)[i], rel=1e-10)

    def test_rank_preserved(self, rng):
        cfg = model.make_config(M=2, N=2, P=1.0, rho=0.3, K=5)
        F = random_complex(rng, cfg.N_T, cfg.r)
        sp = model.assemble_pilot(cfg, model.PilotFactor(
            F=F, V=model.default_pilot_basis(cfg.r, cfg.K)))
        s = np.linalg.svd(sp.P, compute_uv=False)
        assert np.sum(s > 1e-9 * s[0]) == np.linalg.matrix_rank(F)

    def test_factor_round_trip(self, rng):
        cfg = model.make_config(M=3, N=2, P=1.5, rho=0.5, K=6)
        F = random_feasible_factor(rng, cfg)
        pf = model.PilotFactor(F=F, V=model.default_pilot_basis(cfg.r, cfg.K))
        sp = model.assemble_pilot(cfg, pf)
        pf2 = model.factor_from_pilot(cfg, sp)
        sp2 = model.assemble_pilot(cfg, pf2)
        assert np.linalg.norm(sp2.P - sp.P) < 1e-9 * np.linalg.norm(sp.P)

    def test_semi_unitary_enforced(self, rng):
        cfg = model.make_config(M=2, N=1, P=1.0, K=3)
        bad = model.PilotFactor(F=random_complex(rng, 2, 1),
                                V=2.0 * model.default_pilot_basis(1, 3))
        with pytest.raises(model.ConfigError):
            model.assemble_pilot(cfg, bad)


class TestDefaultPilotBasis:
    def test_exactly_semi_unitary(self):
        V = model.default_pilot_basis(3, 8)
        assert np.linalg.norm(V @ V.conj().T - np.eye(3)) < 1e-14


class TestValidateAnece:
    def test_closed_form_passes(self):
        cfg = model.make_config(M=3, N=2, P=1.0)
        sp = model.assemble_pilot(cfg, closed_form_factor(cfg))
        rep = model.validate_anece(cfg, sp)
        assert rep.rank_total == cfg.r == 4
        assert rep.subpilot_ranks == (4, 4, 4)
        assert rep.passed

    def test_zero_pilot_fails_both(self):
        cfg = model.make_config(M=2, N=1, P=1.0)
        rep = model.validate_anece(cfg, model.StackedPilot(
            P=np.zeros((2, 1), dtype=complex), N=cfg.N))
        assert not rep.eve_deficient
        assert not rep.users_excited

    def test_full_rank_pilot_fails_deficiency(self, rng):
        cfg = model.make_config(M=2, N=2, P=1.0, K=4)
        P = random_complex(rng, 4, 4)  # full rank: Eve sees everything
        rep = model.validate_anece(cfg, model.StackedPilot(P=P, N=cfg.N))
        assert rep.users_excited
        assert not rep.eve_deficient
