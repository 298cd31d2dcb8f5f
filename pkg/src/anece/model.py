"""Problem-instance data model.

Holds the network configuration (antenna counts, powers, noise variances,
transmit/receive correlation), the two pilot representations (the design
factor F with its semi-unitary completion V, and the assembled stacked pilot
P), selection operators, and the rank validation that certifies a pilot as
anti-eavesdropping.

Conventions, fixed once here and relied on everywhere:
  * user indices are 0-based in code (reports label users 1-based),
  * R_i = U_i diag(lam_i) U_i^H with lam_i descending and sum(lam_i) = N_i,
  * R_i^{1/2} = U_i diag(sqrt(lam_i)), so R^{H/2} = diag(sqrt(lam)) U^H,
  * the stacked pilot is P = Rbar^{-T/2} conj(F) conj(V) with V V^H = I_r.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .linalg import Array


class ConfigError(ValueError):
    pass


def exp_correlation(N: int, rho: float) -> Array:
    """Exponential correlation matrix with entries rho^|l-k| (Hermitian PD)."""
    if not 0.0 <= rho < 1.0:
        raise ConfigError(f"correlation coefficient must be in [0, 1), got {rho}")
    idx = np.arange(N)
    return (rho ** np.abs(np.subtract.outer(idx, idx))).astype(np.complex128)


@dataclass(eq=False)
class NetworkConfig:
    """Full problem instance for M >= 2 full-duplex users plus Eve.

    N, P, sigma2, sigmaE2 are per-user tuples; R is a tuple of N_i x N_i
    Hermitian PD correlation matrices with trace N_i.  K is the pilot length
    and r the target pilot rank, N_T - min(N) <= r <= N_T - 1.
    """

    N: tuple[int, ...]
    P: tuple[float, ...]
    sigma2: tuple[float, ...]
    R: tuple[Array, ...]
    K: int
    r: int
    N_E: int = 1
    sigmaE2: tuple[float, ...] = ()

    # derived, filled in __post_init__
    N_T: int = field(init=False)
    offsets: tuple[int, ...] = field(init=False)
    lam: tuple[Array, ...] = field(init=False)
    evecs: tuple[Array, ...] = field(init=False)

    def __post_init__(self):
        M = len(self.N)
        if M < 2:
            raise ConfigError("need at least two users")
        if not (len(self.P) == len(self.sigma2) == len(self.R) == M):
            raise ConfigError("N, P, sigma2, R must all have one entry per user")
        if not self.sigmaE2:
            self.sigmaE2 = (1.0,) * M
        if len(self.sigmaE2) != M:
            raise ConfigError("sigmaE2 must have one entry per user")
        if any(n < 1 for n in self.N):
            raise ConfigError("antenna counts must be >= 1")
        if any(p <= 0 for p in self.P) or any(s <= 0 for s in self.sigma2):
            raise ConfigError("powers and noise variances must be positive")

        self.N_T = int(sum(self.N))
        off = np.concatenate([[0], np.cumsum(self.N)])
        self.offsets = tuple(int(o) for o in off)

        if not (self.N_T - min(self.N) <= self.r <= self.N_T - 1):
            raise ConfigError(
                f"pilot rank r={self.r} outside [{self.N_T - min(self.N)}, {self.N_T - 1}]"
            )
        if self.K < self.r:
            raise ConfigError(f"pilot length K={self.K} must be >= r={self.r}")

        lam, evecs = [], []
        for i, (n, Ri) in enumerate(zip(self.N, self.R)):
            Ri = linalg.check_hermitian(np.asarray(Ri, dtype=np.complex128))
            if Ri.shape != (n, n):
                raise ConfigError(f"R[{i}] must be {n}x{n}")
            U, lm = linalg.hermitian_evd(Ri)
            if lm[-1] <= linalg.PD_RTOL * lm[0]:
                raise ConfigError(f"R[{i}] is not positive definite")
            if abs(lm.sum() - n) > 1e-8 * n:
                raise ConfigError(f"R[{i}] must have trace N_i={n} (unit-average eigenvalues)")
            lam.append(lm)
            evecs.append(U)
        self.lam = tuple(lam)
        self.evecs = tuple(evecs)

    @property
    def M(self) -> int:
        return len(self.N)

    def block(self, i: int) -> slice:
        """Row slice of user i inside any N_T-row stacked matrix."""
        if not 0 <= i < self.M:
            raise IndexError(f"user index {i} out of range for M={self.M}")
        return slice(self.offsets[i], self.offsets[i + 1])

    def others(self, i: int) -> Array:
        """Row indices of all users except i, ascending (the S-bar stacking order)."""
        if not 0 <= i < self.M:
            raise IndexError(f"user index {i} out of range for M={self.M}")
        return np.concatenate(
            [np.arange(self.offsets[j], self.offsets[j + 1]) for j in range(self.M) if j != i]
        )

    def pairs(self):
        """Ordered user pairs (i, j) with i < j."""
        return [(i, j) for i in range(self.M) for j in range(i + 1, self.M)]

    # per-user square roots of R in the eigenbasis convention
    def r_sqrt(self, i: int) -> Array:
        """R_i^{1/2} = U diag(sqrt(lam))."""
        return self.evecs[i] * np.sqrt(self.lam[i])

    def r_sqrt_h(self, i: int) -> Array:
        """R_i^{H/2} = diag(sqrt(lam)) U^H."""
        return self.r_sqrt(i).conj().T

    def r_isqrt_conj(self, i: int) -> Array:
        """R_i^{-T/2} = conj(U) diag(1/sqrt(lam)); left factor of the assembled pilot."""
        return self.evecs[i].conj() / np.sqrt(self.lam[i])

    def rbar_sqrt_h(self) -> Array:
        """Block-diagonal Rbar^{H/2}."""
        out = np.zeros((self.N_T, self.N_T), dtype=np.complex128)
        for i in range(self.M):
            out[self.block(i), self.block(i)] = self.r_sqrt_h(i)
        return out

    def kp(self, i: int) -> float:
        """Per-user pilot energy budget K * P_i."""
        return self.K * self.P[i]


def make_config(
    M=None,
    N=4,
    P=None,
    KP_dB=None,
    sigma2=1.0,
    rho=0.0,
    R=None,
    K=None,
    r=None,
    N_E=1,
    sigmaE2=1.0,
) -> NetworkConfig:
    """Convenience constructor with scalar broadcasting and dB power input.

    Exactly one of P (linear) and KP_dB (10*log10(K*P)) must be given.
    rho builds exponential correlation matrices unless explicit R is passed.
    r defaults to N_T - min(N) (maximal rank deficiency), K defaults to r.
    """
    if M is None:
        M = len(N) if np.iterable(N) else 2
    N = tuple(int(n) for n in (N if np.iterable(N) else [N] * M))
    if len(N) != M:
        raise ConfigError("len(N) must equal M")
    N_T = sum(N)
    r = int(r) if r is not None else N_T - min(N)
    K = int(K) if K is not None else r

    if (P is None) == (KP_dB is None):
        raise ConfigError("give exactly one of P and KP_dB")
    if P is None:
        kp_db = list(KP_dB) if np.iterable(KP_dB) else [KP_dB] * M
        P = tuple(10.0 ** (db / 10.0) / K for db in kp_db)
    else:
        P = tuple(float(p) for p in (P if np.iterable(P) else [P] * M))

    sigma2 = tuple(float(s) for s in (sigma2 if np.iterable(sigma2) else [sigma2] * M))
    sigmaE2 = tuple(float(s) for s in (sigmaE2 if np.iterable(sigmaE2) else [sigmaE2] * M))

    if R is None:
        rho = list(rho) if np.iterable(rho) else [rho] * M
        R = tuple(exp_correlation(n, rh) for n, rh in zip(N, rho))
    else:
        R = tuple(np.asarray(Ri, dtype=np.complex128) for Ri in R)

    return NetworkConfig(N=N, P=P, sigma2=sigma2, R=R, K=K, r=r, N_E=int(N_E), sigmaE2=sigmaE2)


def _complex_matrix_from_json(obj) -> Array:
    entries = np.asarray(obj, dtype=float)
    if entries.ndim == 2:  # plain real matrix
        return entries.astype(np.complex128)
    if entries.ndim == 3 and entries.shape[-1] == 2:  # [re, im] pairs
        return entries[..., 0] + 1j * entries[..., 1]
    raise ConfigError("matrix entries must be real or [re, im] pairs")


def config_from_dict(d: dict) -> NetworkConfig:
    """Build a NetworkConfig from the JSON config schema.

    Keys: M, N, P or KP_dB, sigma2, rho or R, K, r, N_E, sigmaE2.
    Scalars broadcast across users; dB power means 10*log10(K*P).
    """
    known = {"M", "N", "P", "KP_dB", "sigma2", "rho", "R", "K", "r", "N_E", "sigmaE2"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = dict(d)
    if "R" in kwargs:
        kwargs["R"] = [_complex_matrix_from_json(Ri) for Ri in kwargs["R"]]
    defaults = dict(sigma2=1.0, rho=0.0, N_E=1, sigmaE2=1.0)
    for k, v in defaults.items():
        kwargs.setdefault(k, v)
    return make_config(**kwargs)


def load_config(path) -> NetworkConfig:
    with open(path) as f:
        return config_from_dict(json.load(f))


def selection(cfg: NetworkConfig, i: int) -> tuple[Array, Array]:
    """Selection operators (S_i, Sbar_i) as explicit 0/1 matrices.

    S_i picks user i's rows out of an N_T-row stack; Sbar_i stacks S_j for
    all j != i in ascending j.  Hot paths use cfg.block / cfg.others slicing,
    which is equivalent.
    """
    S = np.zeros((cfg.N[i], cfg.N_T))
    S[np.arange(cfg.N[i]), np.arange(cfg.offsets[i], cfg.offsets[i + 1])] = 1.0
    oth = cfg.others(i)
    Sbar = np.zeros((cfg.N_T - cfg.N[i], cfg.N_T))
    Sbar[np.arange(oth.size), oth] = 1.0
    return S, Sbar


def default_pilot_basis(r: int, K: int) -> Array:
    """Default semi-unitary V: first r rows of the K-point DFT scaled by 1/sqrt(K)."""
    if K < r:
        raise ConfigError("need K >= r for a semi-unitary r x K basis")
    return linalg.dft_matrix(K)[:r] / np.sqrt(K)


@dataclass
class PilotFactor:
    """Design variable F (N_T x r) plus the semi-unitary completion V (r x K)."""

    F: Array
    V: Array

    def validate(self, cfg: NetworkConfig, require_full_rank: bool = False) -> "PilotFactor":
        F = np.asarray(self.F, dtype=np.complex128)
        V = np.asarray(self.V, dtype=np.complex128)
        if F.shape != (cfg.N_T, cfg.r):
            raise ConfigError(f"F must be {cfg.N_T}x{cfg.r}, got {F.shape}")
        if V.shape != (cfg.r, cfg.K):
            raise ConfigError(f"V must be {cfg.r}x{cfg.K}, got {V.shape}")
        if np.linalg.norm(V @ V.conj().T - np.eye(cfg.r)) > 1e-10 * np.sqrt(cfg.r):
            raise ConfigError("V is not semi-unitary (V V^H != I)")
        if require_full_rank:
            s = np.linalg.svd(F, compute_uv=False)
            if s[-1] <= RANK_RTOL * s[0]:
                raise ConfigError("F does not have full column rank")
        return self


@dataclass
class StackedPilot:
    """Assembled pilot P (N_T x K) with the antenna partition for block access."""

    P: Array
    N: tuple[int, ...]

    def user_block(self, i: int) -> Array:
        off = np.concatenate([[0], np.cumsum(self.N)])
        return self.P[off[i]:off[i + 1]]

    def without_user(self, i: int) -> Array:
        off = np.concatenate([[0], np.cumsum(self.N)])
        keep = [k for k in range(self.P.shape[0]) if not off[i] <= k < off[i + 1]]
        return self.P[keep]


def assemble_pilot(cfg: NetworkConfig, pf: PilotFactor) -> StackedPilot:
    """Assemble P = Rbar^{-T/2} conj(F) conj(V) from a validated factor."""
    pf.validate(cfg)
    FV = pf.F.conj() @ pf.V.conj()
    P = np.empty_like(FV)
    for i in range(cfg.M):
        P[cfg.block(i)] = cfg.r_isqrt_conj(i) @ FV[cfg.block(i)]
    return StackedPilot(P=P, N=cfg.N)


def factor_from_pilot(cfg: NetworkConfig, sp: StackedPilot) -> PilotFactor:
    """Recover a (F, V) factorization of an arbitrary stacked pilot.

    Thin SVD of Rbar^{H/2} conj(P) keeping cfg.r directions; exact whenever
    rank(P) <= r, which the ANECE constraint guarantees.
    """
    G = np.empty((cfg.N_T, cfg.K), dtype=np.complex128)
    Pc = np.asarray(sp.P, dtype=np.complex128).conj()
    for i in range(cfg.M):
        G[cfg.block(i)] = cfg.r_sqrt_h(i) @ Pc[cfg.block(i)]
    U, s, Vh = np.linalg.svd(G, full_matrices=False)
    F = U[:, : cfg.r] * s[: cfg.r]
    V = Vh[: cfg.r]
    return PilotFactor(F=F, V=V)


# singular values above RANK_RTOL * s_max count toward rank; separates designed
# zeros from rounding noise
RANK_RTOL = 1e-9


def _rank(A: Array, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


@dataclass
class RankReport:
    """Outcome of the two ANECE rank conditions for a stacked pilot."""

    rank_total: int
    r_target: int
    n_total: int
    subpilot_ranks: tuple[int, ...]
    subpilot_required: tuple[int, ...]

    @property
    def eve_deficient(self) -> bool:
        """rank(P) = r <= N_T - 1: Eve's composite pilot has a null space."""
        return self.rank_total == self.r_target and self.rank_total <= self.n_total - 1

    @property
    def users_excited(self) -> bool:
        """Every sub-pilot has full row rank, so each user can estimate consistently."""
        return all(rk == req for rk, req in zip(self.subpilot_ranks, self.subpilot_required))

    @property
    def passed(self) -> bool:
        return self.eve_deficient and self.users_excited


def validate_anece(cfg: NetworkConfig, sp: StackedPilot, rtol: float = RANK_RTOL) -> RankReport:
    """Check both anti-eavesdropping rank conditions; failures are reported, not raised."""
    ranks = tuple(_rank(sp.without_user(i), rtol) for i in range(cfg.M))
    return RankReport(
        rank_total=_rank(sp.P, rtol),
        r_target=cfg.r,
        n_total=cfg.N_T,
        subpilot_ranks=ranks,
        subpilot_required=tuple(cfg.N_T - n for n in cfg.N),
    )


def power_used(cfg: NetworkConfig, F: Array) -> Array:
    """Per-user pilot energy Tr(S_i Rbar^{-H/2} F F^H Rbar^{-1/2} S_i^T).

    Equals Tr(P_i P_i^H) of the assembled pilot; reduces to row-weighted
    squared norms because the eigenbasis rotation drops out of the trace.
    """
    out = np.empty(cfg.M)
    for i in range(cfg.M):
        Fi = F[cfg.block(i)]
        out[i] = np.sum(np.abs(Fi) ** 2 / cfg.lam[i][:, None])
    return out
