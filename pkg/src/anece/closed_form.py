"""DFT-based pilot constructions and stationarity diagnostics.

Two constructions are provided: the equally-spaced-column DFT factor that
satisfies the KKT systems of both design criteria under the symmetric
isotropic condition (equal antennas, powers, noise, identity correlation),
and the plain truncated-DFT factor used as the optimizer's starting point.
Both meet every per-user power budget with equality.

The KKT residual evaluators quantify how stationary an arbitrary factor is:
they fit the power multipliers by least squares (or accept analytic ones)
and report the relative norm of the stationarity defect, which doubles as a
convergence diagnostic for the barrier solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gradients import grad_sum_mse, grad_sum_mi
from .linalg import Array, dft_matrix
from .model import ConfigError, NetworkConfig, PilotFactor, default_pilot_basis, power_used

__all__ = [
    "dft_matrix",
    "split_spaced_columns",
    "closed_form_factor",
    "baseline_dft_factor",
    "ClosedFormContext",
    "closed_form_context",
    "kkt_residual_mse",
    "kkt_residual_mi",
]


def split_spaced_columns(M: int, N: int, m: int) -> tuple[Array, Array]:
    """Split the NM-point DFT into N equally spaced columns and the rest.

    Selected columns are m, m+M, ..., m+(N-1)M (0-based); the remainder keeps
    its original order.  The two pieces are mutually orthogonal and
    Q_m Q_m^H = N q_m q_m^H kron I_N with q_m the M-point phase ramp.
    """
    if not 0 <= m <= M - 1:
        raise ValueError(f"m must be in [0, {M - 1}], got {m}")
    Q = dft_matrix(N * M)
    picked = m + M * np.arange(N)
    rest = np.array([k for k in range(N * M) if k not in set(picked.tolist())])
    return Q[:, picked], Q[:, rest]


def _require_symmetric(cfg: NetworkConfig) -> tuple[int, float]:
    N = set(cfg.N)
    P = set(cfg.P)
    if len(N) != 1 or len(P) != 1:
        raise ConfigError("closed-form factor needs equal antenna counts and powers")
    N = N.pop()
    if cfg.r != (cfg.M - 1) * N:
        raise ConfigError(f"closed-form factor needs r = (M-1)N = {(cfg.M - 1) * N}, got {cfg.r}")
    return N, P.pop()


def closed_form_factor(cfg: NetworkConfig, m: int = 0) -> PilotFactor:
    """Equally-spaced-column DFT factor, per-user powers met with equality.

    Under the symmetric isotropic condition this is sqrt(KP/(N^2(M-1))) times
    the complementary column block and is a stationary point of both design
    criteria for every m in [0, M-1].  With non-identity correlation the same
    column block is kept and each user's rows are rescaled to its budget; the
    result is then merely a feasible reference, not a stationary point.
    """
    N, _ = _require_symmetric(cfg)
    _, Qbar = split_spaced_columns(cfg.M, N, m)
    base = power_used(cfg, Qbar)
    F = Qbar.copy()
    for i in range(cfg.M):
        F[cfg.block(i)] *= np.sqrt(cfg.kp(i) / base[i])
    return PilotFactor(F=F, V=default_pilot_basis(cfg.r, cfg.K))


def baseline_dft_factor(cfg: NetworkConfig) -> PilotFactor:
    """Truncated-DFT starting factor: sqrt(D) Q_t with per-user power scaling.

    Q_t is the N_T-point DFT without its last N_T - r columns; D holds one
    scale per user chosen so Tr(P_i P_i^H) = K P_i exactly.
    """
    Qt = dft_matrix(cfg.N_T)[:, : cfg.r]
    base = power_used(cfg, Qt)
    F = Qt.copy()
    for i in range(cfg.M):
        F[cfg.block(i)] *= np.sqrt(cfg.kp(i) / base[i])
    return PilotFactor(F=F, V=default_pilot_basis(cfg.r, cfg.K))


@dataclass
class ClosedFormContext:
    """Scalar quantities of the symmetric-isotropic stationary point.

    alpha_d is the squared column scale KP/(sigma^2 N^2 (M-1)) folded with the
    noise variance; beta the curvature correction of the MSE gradient; gamma
    the common eigenvalue of both estimate-covariance factors (0 < gamma < 1);
    mu_mse and mu_mi the power multipliers certifying stationarity.
    """

    m: int
    alpha_d: float
    beta: float
    gamma: float
    mu_mse: float
    mu_mi: float


def closed_form_context(cfg: NetworkConfig, m: int = 0) -> ClosedFormContext:
    """Analytic multipliers for the equally-spaced DFT factor.

    Requires the symmetric isotropic condition; the common noise variance is
    absorbed into alpha_d, which reduces to KP/(N^2(M-1)) at sigma^2 = 1.
    """
    N, P = _require_symmetric(cfg)
    if len(set(cfg.sigma2)) != 1:
        raise ConfigError("analytic multipliers need a common noise variance")
    for i in range(cfg.M):
        if np.linalg.norm(cfg.R[i] - np.eye(N)) > 1e-10 * N:
            raise ConfigError("analytic multipliers need identity correlation")
    sigma2 = cfg.sigma2[0]
    M = cfg.M
    a = cfg.K * P / (sigma2 * N * N * (M - 1))
    beta = (2 * N * a * (1 + N * a) + (N * a) ** 2 * (M - 1)) / (1 + N * a) ** 2
    gamma = (a * M * N - N * a / (1 + N * a)) / (1 + M * N * a)
    mu_mse = (N / sigma2) * (M - 1 + beta) / (1 + N * M * a) ** 2
    # aggregate of the four-term gradient chains over all ordered user pairs;
    # the rank-one phase-ramp pieces annihilate the factor and drop out
    t0 = N * (M - 1)
    t1 = (N * a / (1 + N * M * a)) * (M * N * (M - 1) - N / (1 + N * a))
    t2 = (a * a * N ** 3 / (1 + N * M * a) ** 2) * (
        M * M * (M - 1) + (M - 1) / (1 + N * a) ** 2 - 2 * M / (1 + N * a)
    )
    mu_mi = (gamma / ((1 - gamma ** 2) * np.log(2.0) * sigma2)) * (t0 - 2 * t1 + t2)
    return ClosedFormContext(m=m, alpha_d=float(a), beta=float(beta), gamma=float(gamma),
                             mu_mse=float(mu_mse), mu_mi=float(mu_mi))


def _fit_multipliers(cfg: NetworkConfig, F: Array, grad: Array, sign: float) -> Array:
    """Least-squares power multipliers for grad + sign * 2 sum_i mu_i S_i^T S_i F = 0."""
    cols = []
    for i in range(cfg.M):
        B = np.zeros_like(F)
        B[cfg.block(i)] = sign * 2.0 * F[cfg.block(i)]
        cols.append(B.ravel())
    A = np.stack(cols, axis=1)
    A_ri = np.concatenate([A.real, A.imag])
    b_ri = np.concatenate([grad.real.ravel(), grad.imag.ravel()])
    mu, *_ = np.linalg.lstsq(A_ri, -b_ri, rcond=None)
    return mu


def _kkt_residual(cfg: NetworkConfig, F, grad: Array, sign: float, mu) -> tuple[float, Array]:
    F = np.asarray(F.F if isinstance(F, PilotFactor) else F, dtype=np.complex128)
    if mu is None:
        mu = _fit_multipliers(cfg, F, grad, sign)
    mu = np.asarray(mu, dtype=float)
    defect = grad.copy()
    for i in range(cfg.M):
        defect[cfg.block(i)] += sign * 2.0 * mu[i] * F[cfg.block(i)]
    gnorm = np.linalg.norm(grad)
    if gnorm == 0.0:
        return float(np.linalg.norm(defect)), mu
    return float(np.linalg.norm(defect) / gnorm), mu


def kkt_residual_mse(cfg: NetworkConfig, F, mu=None) -> tuple[float, Array]:
    """Relative stationarity defect of the sum-MSE problem at F.

    || grad J + 2 sum_i mu_i S_i^T S_i F || / || grad J ||, with mu fitted by
    least squares unless supplied.  Near zero only at stationary points; for
    a zero gradient the absolute defect norm is returned instead.
    """
    Fm = np.asarray(F.F if isinstance(F, PilotFactor) else F, dtype=np.complex128)
    grad = grad_sum_mse(cfg, Fm).G
    return _kkt_residual(cfg, Fm, grad, +1.0, mu)


def kkt_residual_mi(cfg: NetworkConfig, F, mu=None) -> tuple[float, Array]:
    """Relative stationarity defect of the sum-MI problem at F.

    || grad I - 2 sum_i mu_i S_i^T S_i F || / || grad I ||; same conventions
    as the MSE variant.
    """
    Fm = np.asarray(F.F if isinstance(F, PilotFactor) else F, dtype=np.complex128)
    grad = grad_sum_mi(cfg, Fm).G
    return _kkt_residual(cfg, Fm, grad, -1.0, mu)
