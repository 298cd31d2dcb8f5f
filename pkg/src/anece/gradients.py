"""Analytic gradients of the design objectives and barrier terms.

Complex gradient convention, used throughout and by the finite-difference
oracle: grad f = df/dRe(F) + 1j * df/dIm(F).  With this convention the
first-order change of f along a complex direction D is Re(Tr(grad^H D)), and
Tr(A F F^H B) has gradient 2 B A F.

The mutual-information gradient follows the four-term expansion obtained by
rewriting each covariance factor through the matrix inversion lemma; the
diagonal-block extraction uses the commutation permutation so the code
matches the derivation line by line (the matrices are small enough that
clarity wins over index arithmetic).  The sum-MI treatment applies the same
expansion to both factors of each pair, the second factor needing no
commutation because its Kronecker order already leads with the eigenvalue
matrix.  Everything is validated against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import Array, commutation
from .metrics import LN2, _gamma_pair, user_mse, pairwise_mi
from .model import NetworkConfig, power_used


class InfeasibleError(ValueError):
    """A barrier term was evaluated outside its domain."""


@dataclass
class GradientResult:
    G: Array          # gradient with respect to F, N_T x r
    value: float      # objective value at the evaluation point


def grad_user_mse(cfg: NetworkConfig, F: Array, i: int) -> GradientResult:
    """MSE_i and its gradient: -2 sum_l (lam_l/s^2) Sbar^T (I + (lam_l/s^2) X)^{-2} Sbar F."""
    F = np.asarray(F, dtype=np.complex128)
    oth = cfg.others(i)
    Fo = F[oth]
    X = Fo @ Fo.conj().T
    n = X.shape[0]
    xi = np.clip(np.linalg.eigvalsh(X).real, 0.0, None)
    G = np.zeros_like(F)
    for lam_l in cfg.lam[i]:
        c = lam_l / cfg.sigma2[i]
        Ml = np.eye(n) + c * X
        # squared solve instead of an explicit inverse
        Y = np.linalg.solve(Ml, Fo)
        Z = np.linalg.solve(Ml, Y)
        G[oth] += -2.0 * c * Z
    value = np.sum(1.0 / (1.0 + np.outer(cfg.lam[i], xi) / cfg.sigma2[i]))
    return GradientResult(G=G, value=float(value))


def grad_sum_mse(cfg: NetworkConfig, F: Array) -> GradientResult:
    """J_M = sum_i MSE_i and its gradient."""
    F = np.asarray(F, dtype=np.complex128)
    G = np.zeros_like(F)
    total = 0.0
    for i in range(cfg.M):
        res = grad_user_mse(cfg, F, i)
        G += res.G
        total += res.value
    return GradientResult(G=G, value=float(total))


def power_slack(cfg: NetworkConfig, F: Array, i: int) -> float:
    """psi_i = K P_i - Tr(S_i Rbar^{-H/2} F F^H Rbar^{-1/2} S_i^T)."""
    return float(cfg.kp(i) - power_used(cfg, F)[i])


def grad_power_barrier(cfg: NetworkConfig, F: Array, i: int) -> GradientResult:
    """-ln(psi_i) and its gradient 2 Lam_i^{-1} F_i / psi_i on user i's rows."""
    F = np.asarray(F, dtype=np.complex128)
    psi = power_slack(cfg, F, i)
    if psi <= 0:
        raise InfeasibleError(f"power constraint of user {i} violated (slack {psi:.3e})")
    G = np.zeros_like(F)
    G[cfg.block(i)] = 2.0 * (F[cfg.block(i)] / cfg.lam[i][:, None]) / psi
    return GradientResult(G=G, value=float(-np.log(psi)))


def _pair_half_gradient(cfg, F, i, j, blocks) -> Array:
    """One factor's contribution to the pair-MI gradient, before the 2/ln2 scale.

    ``blocks[l]`` is the l-th N_j x N_j diagonal block of the weight matrix
    paired with eigenvalue lam_{i,l}.  Returns the full N_T x N_T matrix
    G0 - G1 + G2 - G3 whose product with F is the gradient contribution.
    """
    oth = cfg.others(i)
    blk = np.arange(cfg.offsets[j], cfg.offsets[j + 1])
    Fo, Fj = F[oth], F[blk]
    X = Fo @ Fo.conj().T
    n = X.shape[0]
    out = np.zeros((cfg.N_T, cfg.N_T), dtype=np.complex128)
    for l, lam_l in enumerate(cfg.lam[i]):
        c = lam_l / cfg.sigma2[i]
        Bl = blocks[l]
        Yl = np.linalg.solve(np.eye(n) + c * X, Fo)       # A_l Sbar F
        FjYl = Fj @ Yl.conj().T                           # S_j F F^H Sbar^T A_l
        out[np.ix_(blk, blk)] += c * Bl
        out[np.ix_(oth, blk)] -= c * c * Yl @ (Fj.conj().T @ Bl)
        out[np.ix_(oth, oth)] += c ** 3 * (Yl @ Fj.conj().T) @ Bl @ FjYl
        out[np.ix_(blk, oth)] -= c * c * Bl @ FjYl
    return out


def grad_pair_mi(cfg: NetworkConfig, F: Array, i: int, j: int) -> GradientResult:
    """Mutual information of pair (i, j) and its gradient with respect to F."""
    F = np.asarray(F, dtype=np.complex128)
    G_ij, G_Tji = _gamma_pair(cfg, F, i, j)
    core = np.eye(G_ij.shape[0]) - G_ij @ G_Tji
    sign, logabsdet = np.linalg.slogdet(core)
    value = float(-logabsdet / LN2)

    # weight for the first factor: T^T G_Tji (I - G_ij G_Tji)^{-1} T, swapping the
    # Kronecker order so the eigenvalue index becomes the outer block index
    W1 = np.linalg.solve(core.conj().T, G_Tji.conj().T).conj().T
    T = commutation(cfg.N[j], cfg.N[i])
    W1s = T.T @ W1 @ T
    nj = cfg.N[j]
    blocks1 = [W1s[l * nj:(l + 1) * nj, l * nj:(l + 1) * nj] for l in range(cfg.N[i])]
    # weight for the second factor; its Kronecker order already leads with Lam_j
    W2 = np.linalg.solve(core, G_ij)
    ni = cfg.N[i]
    blocks2 = [W2[k * ni:(k + 1) * ni, k * ni:(k + 1) * ni] for k in range(cfg.N[j])]

    total = _pair_half_gradient(cfg, F, i, j, blocks1)
    total += _pair_half_gradient(cfg, F, j, i, blocks2)
    return GradientResult(G=(2.0 / LN2) * (total @ F), value=value)


def grad_sum_mi(cfg: NetworkConfig, F: Array) -> GradientResult:
    """I_M = sum over pairs of the pairwise MI, and its gradient.

    Pair contributions are accumulated in sorted pair order so the floating
    point result is reproducible.
    """
    F = np.asarray(F, dtype=np.complex128)
    G = np.zeros_like(F)
    total = 0.0
    for i, j in cfg.pairs():
        res = grad_pair_mi(cfg, F, i, j)
        G += res.G
        total += res.value
    return GradientResult(G=G, value=float(total))


@dataclass
class FairnessGradient:
    G: Array          # gradient with respect to F
    d_eps: float      # gradient with respect to the worst-case bound
    value: float      # barrier objective t*eps + sum of barrier terms


def grad_fairness(cfg: NetworkConfig, F: Array, eps: float, mode: str,
                  t: float = 1.0) -> FairnessGradient:
    """Joint (eps, F) gradient of the worst-case barrier objective.

    mode "mse": t*eps - sum_i ln(psi_Pi) - sum_i ln(eps - MSE_i)
    mode "mi":  t*eps - sum_i ln(psi_Pi) - sum_pairs ln(eps + MI_ij)
    (the MI constraint bounds log2|I - G G| = -MI from above by eps).
    Raises InfeasibleError when any barrier argument is not strictly positive.
    """
    F = np.asarray(F, dtype=np.complex128)
    G = np.zeros_like(F)
    value = t * eps
    d_eps = t
    for i in range(cfg.M):
        res = grad_power_barrier(cfg, F, i)
        G += res.G
        value += res.value

    if mode == "mse":
        for i in range(cfg.M):
            res = grad_user_mse(cfg, F, i)
            slack = eps - res.value
            if slack <= 0:
                raise InfeasibleError(f"MSE of user {i} exceeds eps (slack {slack:.3e})")
            value += -np.log(slack)
            G += res.G / slack
            d_eps += -1.0 / slack
    elif mode == "mi":
        for i, j in cfg.pairs():
            res = grad_pair_mi(cfg, F, i, j)
            slack = eps + res.value
            if slack <= 0:
                raise InfeasibleError(f"MI of pair {(i, j)} below -eps (slack {slack:.3e})")
            value += -np.log(slack)
            G += -res.G / slack
            d_eps += -1.0 / slack
    else:
        raise ValueError(f"mode must be 'mse' or 'mi', got {mode!r}")
    return FairnessGradient(G=G, d_eps=float(d_eps), value=float(value))


def finite_difference(f, X: Array, step: float = 1e-6) -> Array:
    """Central finite-difference gradient in the df/dRe + j df/dIm convention.

    Perturbs every real and imaginary coordinate independently; the oracle
    against which every analytic gradient in this module is validated.
    """
    X = np.asarray(X, dtype=np.complex128)
    G = np.zeros_like(X)
    for idx in np.ndindex(*X.shape):
        for unit in (1.0, 1.0j):
            E = np.zeros_like(X)
            E[idx] = unit
            fp = f(X + step * E)
            fm = f(X - step * E)
            G[idx] += unit * (fp - fm) / (2.0 * step)
    return G
