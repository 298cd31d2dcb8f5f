"""Closed-form performance evaluators.

Per-user MMSE channel-estimation error, its maximum-likelihood counterpart,
pairwise/sum mutual information between users' pilot observations, Eve's
irreducible MMSE, and the normalized aggregates used for cross-method
comparison.

Evaluators accept either a PilotFactor (preferred; everything is a function
of F) or a StackedPilot (converted explicitly).  Eve's MSE is defined on the
stacked pilot itself.  The mutual information default is the ratio form
-log2|I - G_ij G_Tji| built in F-space, which stays well conditioned at high
power; the direct joint-covariance form is kept as a cross-check oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import Array, kron
from .model import NetworkConfig, PilotFactor, StackedPilot, assemble_pilot, factor_from_pilot

LN2 = np.log(2.0)


class RankDeficientError(ValueError):
    """An effective pilot lost the rank the estimator relies on."""


def _as_factor(cfg: NetworkConfig, pilot) -> Array:
    if isinstance(pilot, PilotFactor):
        return np.asarray(pilot.F, dtype=np.complex128)
    if isinstance(pilot, StackedPilot):
        return np.asarray(factor_from_pilot(cfg, pilot).F, dtype=np.complex128)
    return np.asarray(pilot, dtype=np.complex128)  # bare F matrix


def _as_stacked(cfg: NetworkConfig, pilot) -> StackedPilot:
    if isinstance(pilot, StackedPilot):
        return pilot
    if not isinstance(pilot, PilotFactor):
        raise TypeError("need a PilotFactor or StackedPilot")
    return assemble_pilot(cfg, pilot)


def user_mse(cfg: NetworkConfig, pilot) -> tuple[Array, float]:
    """Per-user MMSE traces and their sum.

    MSE_i = Tr([I + (1/sigma_i^2)(Lam_i kron Sbar_i F F^H Sbar_i^T)]^{-1}),
    evaluated through the eigenvalues of the excitation matrix.
    """
    F = _as_factor(cfg, pilot)
    mse = np.empty(cfg.M)
    for i in range(cfg.M):
        Fo = F[cfg.others(i)]
        xi = np.linalg.eigvalsh(Fo @ Fo.conj().T).real
        xi = np.clip(xi, 0.0, None)
        mse[i] = np.sum(1.0 / (1.0 + np.outer(cfg.lam[i], xi) / cfg.sigma2[i]))
    return mse, float(mse.sum())


def ml_mse(cfg: NetworkConfig, pilot) -> float:
    """Sum of per-user ML estimation error traces.

    sum_i sigma_i^2 Tr((Sbar_i F F^H Sbar_i^T kron Lam_i)^{-1}); requires every
    excitation matrix to be nonsingular, otherwise the ML estimate does not
    exist and the rank collapse is signalled.
    """
    F = _as_factor(cfg, pilot)
    total = 0.0
    for i in range(cfg.M):
        Fo = F[cfg.others(i)]
        xi = np.linalg.eigvalsh(Fo @ Fo.conj().T).real
        if xi[0] <= 1e-12 * max(xi[-1], 1.0):
            raise RankDeficientError(
                f"effective pilot for user {i} is rank deficient; ML estimate undefined"
            )
        total += cfg.sigma2[i] * np.sum(1.0 / np.outer(cfg.lam[i], xi))
    return float(total)


def _gamma_pair(cfg: NetworkConfig, F: Array, i: int, j: int) -> tuple[Array, Array]:
    """The two estimate-covariance factors for the (i, j) observation pair.

    G_ij   = (S_j F kron Lam_i^{1/2}) (s_i^2 I + F^H Sbar_i^T Sbar_i F kron Lam_i)^{-1} (..)^H
    G_Tji  = (Lam_j^{1/2} kron S_i F) (s_j^2 I + Lam_j kron F^H Sbar_j^T Sbar_j F)^{-1} (..)^H
    Both are N_j*N_i square, Hermitian PSD.
    """
    sqlam_i = np.sqrt(cfg.lam[i])
    sqlam_j = np.sqrt(cfg.lam[j])

    Fo_i = F[cfg.others(i)]
    L1 = kron(F[cfg.block(j)], np.diag(sqlam_i))
    M1 = cfg.sigma2[i] * np.eye(cfg.r * cfg.N[i]) + kron(Fo_i.conj().T @ Fo_i, np.diag(cfg.lam[i]))
    G_ij = L1 @ np.linalg.solve(M1, L1.conj().T)

    Fo_j = F[cfg.others(j)]
    L2 = kron(np.diag(sqlam_j), F[cfg.block(i)])
    M2 = cfg.sigma2[j] * np.eye(cfg.N[j] * cfg.r) + kron(np.diag(cfg.lam[j]), Fo_j.conj().T @ Fo_j)
    G_Tji = L2 @ np.linalg.solve(M2, L2.conj().T)
    return G_ij, G_Tji


def pairwise_mi(cfg: NetworkConfig, pilot, i: int, j: int) -> float:
    """Mutual information (bits) between the observations of users i and j."""
    if i == j:
        raise ValueError("need two distinct users")
    F = _as_factor(cfg, pilot)
    G_ij, G_Tji = _gamma_pair(cfg, F, i, j)
    _, logabsdet = np.linalg.slogdet(np.eye(G_ij.shape[0]) - G_ij @ G_Tji)
    return float(-logabsdet / LN2)


def sum_mi(cfg: NetworkConfig, pilot) -> tuple[dict, float]:
    """All pairwise MIs keyed by (i, j) with i < j, and their sum."""
    F = _as_factor(cfg, pilot)
    per_pair = {}
    for i, j in cfg.pairs():
        per_pair[(i, j)] = pairwise_mi(cfg, F, i, j)
    return per_pair, float(sum(per_pair.values()))


def _observation_model(cfg: NetworkConfig, P: Array, i: int, j: int):
    """The four observation operators of the vectorized pair model, built from P.

    Gbar_i = Sbar_i Rbar^{H/2} conj(P) kron R_i^{H/2}           (all-channel, user i)
    GbarT_j = R_j^{H/2} kron Sbar_j Rbar^{H/2} conj(P)          (all-channel, user j, transposed view)
    G_ij = S_j Rbar^{H/2} conj(P) kron R_i^{H/2}                (pair channel seen by i)
    GT_ji = R_j^{H/2} kron S_i Rbar^{H/2} conj(P)               (pair channel seen by j)
    """
    W = np.empty((cfg.N_T, cfg.K), dtype=np.complex128)
    Pc = P.conj()
    for k in range(cfg.M):
        W[cfg.block(k)] = cfg.r_sqrt_h(k) @ Pc[cfg.block(k)]
    Gbar_i = kron(W[cfg.others(i)], cfg.r_sqrt_h(i))
    GbarT_j = kron(cfg.r_sqrt_h(j), W[cfg.others(j)])
    G_ij = kron(W[cfg.block(j)], cfg.r_sqrt_h(i))
    GT_ji = kron(cfg.r_sqrt_h(j), W[cfg.block(i)])
    return Gbar_i, GbarT_j, G_ij, GT_ji


def _gaussian_mi(Ka: Array, Kb: Array, Kab: Array) -> float:
    """MI of two jointly Gaussian vectors from their covariance blocks (bits)."""
    joint = np.block([[Ka, Kab], [Kab.conj().T, Kb]])
    terms = []
    for X in (Ka, Kb, joint):
        sign, logabsdet = np.linalg.slogdet(X)
        terms.append(logabsdet)
    return float((terms[0] + terms[1] - terms[2]) / LN2)


def pairwise_mi_joint(cfg: NetworkConfig, pilot, i: int, j: int) -> float:
    """Cross-check oracle: the same MI from the raw observation covariances.

    Builds K_{y_i}, K_{y_Tj} and their cross covariance directly from the
    stacked pilot and evaluates log-determinants of the joint covariance.
    Less well conditioned than pairwise_mi at high power; used in tests.
    """
    sp = _as_stacked(cfg, pilot)
    Gbar_i, GbarT_j, G_ij, GT_ji = _observation_model(cfg, sp.P, i, j)
    Kyi = cfg.sigma2[i] * np.eye(Gbar_i.shape[1]) + Gbar_i.conj().T @ Gbar_i
    Kyj = cfg.sigma2[j] * np.eye(GbarT_j.shape[1]) + GbarT_j.conj().T @ GbarT_j
    Kij = G_ij.conj().T @ GT_ji
    return _gaussian_mi(Kyi, Kyj, Kij)


def mi_lemma1_oracle(cfg: NetworkConfig, pilot, i: int, j: int) -> float:
    """MI between the two MMSE estimates of the shared pair channel.

    Equals pairwise_mi whenever S_j Rbar^{H/2} conj(P), S_i Rbar^{H/2} conj(P),
    R_i and R_j all have full row rank (needs K >= max(N_i, N_j)); rank
    deficiency is signalled because the estimate covariances turn singular.
    """
    sp = _as_stacked(cfg, pilot)
    Gbar_i, GbarT_j, G_ij, GT_ji = _observation_model(cfg, sp.P, i, j)

    W = np.empty((cfg.N_T, cfg.K), dtype=np.complex128)
    Pc = sp.P.conj()
    for k in range(cfg.M):
        W[cfg.block(k)] = cfg.r_sqrt_h(k) @ Pc[cfg.block(k)]
    for blk, who in ((W[cfg.block(j)], j), (W[cfg.block(i)], i)):
        s = np.linalg.svd(blk, compute_uv=False)
        if s.size == 0 or s[-1] <= 1e-10 * max(s[0], 1.0):
            raise RankDeficientError(f"S_{who} Rbar^(H/2) conj(P) lost full row rank")

    Kyi = cfg.sigma2[i] * np.eye(Gbar_i.shape[1]) + Gbar_i.conj().T @ Gbar_i
    Kyj = cfg.sigma2[j] * np.eye(GbarT_j.shape[1]) + GbarT_j.conj().T @ GbarT_j
    Kyij = G_ij.conj().T @ GT_ji

    Ai = np.linalg.solve(Kyi, G_ij.conj().T).conj().T  # G_ij Kyi^{-1}
    Aj = np.linalg.solve(Kyj, GT_ji.conj().T).conj().T
    Kest_i = Ai @ G_ij.conj().T
    Kest_j = Aj @ GT_ji.conj().T
    Kest_ij = Ai @ Kyij @ Aj.conj().T
    return _gaussian_mi(Kest_i, Kest_j, Kest_ij)


def eve_mse(cfg: NetworkConfig, pilot) -> tuple[Array, float]:
    """Eve's per-user MMSE traces and the power-floor-revealing average.

    Tr(K_dh_Ei) = sigmaE_i^2 N_E [Tr(S_i Uc (I + L^2)^{-1} Uc^H S_i^T)
                                  + Tr(S_i Un Un^H S_i^T)]
    with (Uc, L) the leading-r left singular pairs of Sigma_E^{1/2} Rbar^{H/2}
    conj(P) and Un the remaining left singular vectors.  The second term does
    not shrink with transmit power; it is the anti-eavesdropping floor.
    Returns (per-user traces, average of trace / (N_E * N_i)).
    """
    sp = _as_stacked(cfg, pilot)
    G = np.empty((cfg.N_T, cfg.K), dtype=np.complex128)
    Pc = np.asarray(sp.P, dtype=np.complex128).conj()
    for k in range(cfg.M):
        G[cfg.block(k)] = np.sqrt(cfg.sigmaE2[k]) * (cfg.r_sqrt_h(k) @ Pc[cfg.block(k)])
    U, s, _ = np.linalg.svd(G, full_matrices=True)
    lam2 = np.zeros(cfg.r)
    lam2[: min(cfg.r, s.size)] = s[: cfg.r] ** 2

    per_user = np.empty(cfg.M)
    norm_sum = 0.0
    for i in range(cfg.M):
        Uc = U[cfg.block(i), : cfg.r]
        Un = U[cfg.block(i), cfg.r:]
        shrink = float(np.sum(np.abs(Uc) ** 2 / (1.0 + lam2)[None, :]))
        floor = float(np.sum(np.abs(Un) ** 2))
        per_user[i] = cfg.sigmaE2[i] * cfg.N_E * (shrink + floor)
        norm_sum += per_user[i] / (cfg.N_E * cfg.N[i])
    return per_user, float(norm_sum / cfg.M)


def normalize(cfg: NetworkConfig, J_M: float, I_M: float) -> tuple[float, float]:
    """Per-element MSE and per-pair-per-DoF MI; defined for equal antenna counts only."""
    n = set(cfg.N)
    if len(n) != 1:
        raise ValueError("normalized metrics need all users to have the same antenna count")
    N = n.pop()
    denom = cfg.M * (cfg.M - 1) * N * N
    return J_M / denom, I_M / (denom / 2)


@dataclass
class MetricReport:
    """Everything the comparison harness consumes for one pilot."""

    mse_per_user: Array
    J_M: float
    J_norm: float
    mi_per_pair: dict
    I_M: float
    I_norm: float
    eve_mse_per_user: Array
    eve_norm: float


def report(cfg: NetworkConfig, pilot) -> MetricReport:
    """Evaluate the full metric set; normalized values are NaN for unequal N."""
    mse, J_M = user_mse(cfg, pilot)
    per_pair, I_M = sum_mi(cfg, pilot)
    eve_per_user, eve_norm = eve_mse(cfg, pilot)
    try:
        J_norm, I_norm = normalize(cfg, J_M, I_M)
    except ValueError:
        J_norm, I_norm = float("nan"), float("nan")
    return MetricReport(
        mse_per_user=mse,
        J_M=J_M,
        J_norm=J_norm,
        mi_per_pair=per_pair,
        I_M=I_M,
        I_norm=I_norm,
        eve_mse_per_user=eve_per_user,
        eve_norm=eve_norm,
    )
