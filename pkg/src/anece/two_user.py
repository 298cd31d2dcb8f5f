"""Efficient two-user solvers.

For M = 2 the design reduces to two per-eigenmode power vectors c1, c2 (the
singular values of each user's factor block, squared and weighted by the
correlation eigenvalues).  The sum-MSE problem then splits into two
independent convex allocations solved by a water-filling style bisection on
the Lagrange multiplier; the sum-MI problem is solved by alternating exact
convex steps on c1 and c2, each via a bisection on its multiplier.

Both solvers keep streams strictly positive (a tiny floor instead of exact
zero) so every user retains a consistent channel estimate, and both return
allocations in descending order, matching the descending correlation
eigenvalues they are paired with.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import Array
from .model import ConfigError, NetworkConfig, PilotFactor, default_pilot_basis

# fraction of the budget used as the strictly-positive stream floor
STREAM_FLOOR = 1e-12
# relative budget tightness |sum(c) - KP| <= BUDGET_RTOL * KP at return
BUDGET_RTOL = 1e-8


class TwoUserError(ValueError):
    pass


@dataclass
class PowerAllocation:
    """Per-eigenmode powers of the two users, descending."""

    c1: Array
    c2: Array

    def budget_used(self) -> tuple[float, float]:
        return float(np.sum(self.c1)), float(np.sum(self.c2))


def _require_two_users(cfg: NetworkConfig) -> None:
    if cfg.M != 2:
        raise TwoUserError(f"two-user solver called with M={cfg.M}")


def uniform_allocation(cfg: NetworkConfig) -> PowerAllocation:
    """Equal per-eigenmode loading c = KP/N; the high-power MI optimum."""
    _require_two_users(cfg)
    return PowerAllocation(
        c1=np.full(cfg.N[0], cfg.kp(0) / cfg.N[0]),
        c2=np.full(cfg.N[1], cfg.kp(1) / cfg.N[1]),
    )


def single_stream_allocation(cfg: NetworkConfig) -> PowerAllocation:
    """All power on the strongest eigenmode; the low-power MI optimum."""
    _require_two_users(cfg)
    out = []
    for i in range(2):
        c = np.full(cfg.N[i], STREAM_FLOOR * cfg.kp(i))
        c[0] = cfg.kp(i) - (cfg.N[i] - 1) * STREAM_FLOOR * cfg.kp(i)
        out.append(c)
    return PowerAllocation(c1=out[0], c2=out[1])


def two_user_objective(cfg: NetworkConfig, alloc: PowerAllocation) -> tuple[float, float]:
    """Sum MSE and sum MI of an allocation, in the decoupled eigenmode form."""
    _require_two_users(cfg)
    c1 = np.asarray(alloc.c1, dtype=float)
    c2 = np.asarray(alloc.c2, dtype=float)
    if np.any(c1 < 0) or np.any(c2 < 0):
        raise TwoUserError("allocations must be nonnegative")
    s1, s2 = cfg.sigma2
    A = np.outer(cfg.lam[0], cfg.lam[1])  # (N1, N2)
    J2 = float(np.sum(1.0 / (1.0 + A * c2[None, :] / s1))
               + np.sum(1.0 / (1.0 + A * c1[:, None] / s2)))
    num = (s2 + A * c1[:, None]) * (s1 + A * c2[None, :])
    den = s1 * s2 + s1 * A * c1[:, None] + s2 * A * c2[None, :]
    I2 = float(np.sum(np.log2(num / den)))
    return J2, I2


def _bisect_decreasing(fn, target, lo, hi, iters=120):
    """Root of fn(x) = target for scalar decreasing fn with fn(lo) >= target >= fn(hi)."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if fn(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _allocate(phi, phi_floor, budget, floor, iters=110):
    """Vector allocation with phi_l(c_l) equalized across active streams.

    phi(c_vec) -> per-stream marginal values, elementwise decreasing;
    phi_floor = phi at the floor vector.  Returns c with sum(c) = budget
    within BUDGET_RTOL and c_l at the floor where the multiplier exceeds
    phi_floor_l.
    """
    n = phi_floor.size

    def c_of_mu(mu):
        c = np.full(n, floor)
        active = phi_floor > mu
        if not np.any(active):
            return c
        lo = np.full(n, floor)
        hi = np.full(n, max(budget, 1.0))
        for _ in range(120):  # grow brackets until phi(hi) < mu on active streams
            vals = phi(hi)
            need = active & (vals >= mu)
            if not np.any(need):
                break
            hi[need] *= 2.0
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            vals = phi(mid)
            go_right = vals > mu
            lo = np.where(active & go_right, mid, lo)
            hi = np.where(active & ~go_right, mid, hi)
        c[active] = (0.5 * (lo + hi))[active]
        return c

    mu_hi = float(phi_floor.max())
    mu_lo = mu_hi * 1e-30
    while np.sum(c_of_mu(mu_lo)) < budget:
        mu_lo *= 1e-10
        if mu_lo < 1e-300:
            break
    mu = _bisect_decreasing(lambda m: np.sum(c_of_mu(m)), budget, mu_lo, mu_hi)
    c = c_of_mu(mu)
    used = np.sum(c)
    if abs(used - budget) > BUDGET_RTOL * budget:
        # distribute the bisection residue over active streams
        active = c > floor
        if np.any(active):
            c[active] += (budget - used) / np.count_nonzero(active)
    return c


def mse_decoupled_allocation(cfg: NetworkConfig) -> PowerAllocation:
    """Globally optimal sum-MSE allocation; the two users decouple completely.

    User u's vector minimizes the other user's trace term
    sum_{l,k} 1/(1 + lam_u_l lam_o_k c_u_l / sigma_o^2), convex in c_u, via a
    bisection on the common marginal value.
    """
    _require_two_users(cfg)
    out = []
    for u in range(2):
        o = 1 - u
        A = np.outer(cfg.lam[u], cfg.lam[o]) / cfg.sigma2[o]  # (Nu, No)
        budget = cfg.kp(u)
        floor = STREAM_FLOOR * budget

        def phi(c):
            return np.sum(A / (1.0 + A * c[:, None]) ** 2, axis=1)

        c = _allocate(phi, phi(np.full(cfg.N[u], floor)), budget, floor)
        out.append(np.sort(c)[::-1])
    return PowerAllocation(c1=out[0], c2=out[1])


def _mi_marginal(cfg, u, c_other):
    """Marginal MI gain per stream of user u (times ln 2), as a function of c_u."""
    o = 1 - u
    su, so = cfg.sigma2[u], cfg.sigma2[o]
    A = np.outer(cfg.lam[u], cfg.lam[o])  # (Nu, No)
    co = np.asarray(c_other, dtype=float)

    def phi(c):
        ax = A * c[:, None]
        num = so * A ** 2 * co[None, :]
        den = (so + ax) * (su * so + su * ax + so * A * co[None, :])
        return np.sum(num / den, axis=1)

    return phi


def mi_alternating_bisection(cfg: NetworkConfig, tol: float = 1e-10,
                             max_outer: int = 500) -> tuple[PowerAllocation, float]:
    """Alternating exact convex steps for the sum-MI allocation.

    Starts from the uniform loading and alternates c1 | c2, each half-step
    solving its multiplier equation sum_k f'(c_l) = mu ln 2 by bisection,
    until the joint vector moves less than tol (relative to the budgets).
    The MI is nondecreasing across outer rounds; non-convergence within the
    cap is flagged.
    """
    _require_two_users(cfg)
    alloc = uniform_allocation(cfg)
    c = [alloc.c1.copy(), alloc.c2.copy()]
    scale = np.sqrt(cfg.kp(0) ** 2 + cfg.kp(1) ** 2)
    for _ in range(max_outer):
        prev = np.concatenate([c[0], c[1]])
        for u in range(2):
            budget = cfg.kp(u)
            floor = STREAM_FLOOR * budget
            phi = _mi_marginal(cfg, u, c[1 - u])
            c[u] = _allocate(phi, phi(np.full(cfg.N[u], floor)), budget, floor)
        if np.linalg.norm(np.concatenate([c[0], c[1]]) - prev) <= tol * scale:
            break
    else:
        raise TwoUserError(f"alternating bisection did not converge in {max_outer} rounds")
    alloc = PowerAllocation(c1=np.sort(c[0])[::-1], c2=np.sort(c[1])[::-1])
    return alloc, two_user_objective(cfg, alloc)[1]


def assemble_two_user_pilot(cfg: NetworkConfig, alloc: PowerAllocation) -> PilotFactor:
    """Factor with diagonal per-user blocks carrying sqrt(c * lam) singular values.

    Valid for r >= max(N1, N2); identity singular bases are optimal for both
    criteria, so the blocks are plain padded diagonals.  The assembled pilot
    has rank max(N1, N2), which equals the configured r at the default
    maximal rank deficiency.
    """
    _require_two_users(cfg)
    if cfg.r < max(cfg.N):
        raise TwoUserError(f"need r >= max(N1, N2) = {max(cfg.N)}, got r={cfg.r}")
    F = np.zeros((cfg.N_T, cfg.r), dtype=np.complex128)
    for u, c in enumerate((alloc.c1, alloc.c2)):
        lam_sv = np.sqrt(np.asarray(c, dtype=float) * cfg.lam[u])
        rows = np.arange(cfg.offsets[u], cfg.offsets[u + 1])
        F[rows, np.arange(cfg.N[u])] = lam_sv
    return PilotFactor(F=F, V=default_pilot_basis(cfg.r, cfg.K))


def mi_convexity_certificate(cfg: NetworkConfig, alloc: PowerAllocation) -> tuple[bool, float]:
    """High-power convexity certificate for the MI allocation problem.

    The per-term Hessian is PSD iff c1_l c2_k >= s1^2 s2^2 / (2 lam1_l^2 lam2_k^2);
    returns (all terms satisfied, worst margin c1*c2 - threshold).
    """
    _require_two_users(cfg)
    thresh = (cfg.sigma2[0] * cfg.sigma2[1]) / (2.0 * np.outer(cfg.lam[0], cfg.lam[1]) ** 2)
    prod = np.outer(alloc.c1, alloc.c2)
    margin = prod - thresh
    return bool(np.all(margin >= 0)), float(margin.min())
