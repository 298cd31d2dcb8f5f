"""Dense complex linear-algebra kernel shared by every other module.

All matrices are numpy ``complex128`` arrays in C (row-major) layout.
Hermitian-tagged inputs are symmetrized as (A + A^H)/2 before factorization
to absorb rounding drift.  The heavy lifting is delegated to numpy/LAPACK;
this module pins the conventions the rest of the package relies on
(descending eigenvalue order, positive-definiteness thresholds, the
commutation permutation).
"""

from __future__ import annotations

import numpy as np

Array = np.ndarray

# relative tolerance for accepting a matrix as Hermitian
HERMITIAN_RTOL = 1e-12
# a Hermitian matrix counts as positive definite when its smallest eigenvalue
# exceeds PD_RTOL times its largest; everything factored here has the form
# sigma^2*I + (PSD), so the two regimes are well separated
PD_RTOL = 1e-12


class NotHermitianError(ValueError):
    pass


class NotPositiveDefiniteError(ValueError):
    pass


def herm(A: Array) -> Array:
    """Symmetrized copy (A + A^H)/2."""
    return 0.5 * (A + A.conj().T)


def check_hermitian(A: Array, rtol: float = HERMITIAN_RTOL) -> Array:
    """Validate that A is Hermitian within ``rtol`` and return herm(A)."""
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {A.shape}")
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - A.conj().T) > max(rtol * scale, 10 * np.finfo(float).tiny):
        raise NotHermitianError("matrix is not Hermitian within tolerance")
    return herm(A)


def kron(A: Array, B: Array) -> Array:
    """Kronecker product A (x) B with block structure A[l,k]*B."""
    return np.kron(A, B)


def hermitian_evd(A: Array) -> tuple[Array, Array]:
    """Eigendecomposition A = U diag(lam) U^H with lam sorted descending.

    Rejects non-Hermitian input.  Ties keep the (deterministic) LAPACK
    ordering after the descending flip.
    """
    A = check_hermitian(A)
    lam, U = np.linalg.eigh(A)
    order = np.argsort(-lam, kind="stable")  # ties keep LAPACK's output order
    return U[:, order], lam[order]


def svd(A: Array) -> tuple[Array, Array, Array]:
    """Full SVD A = U diag(s) Vh with singular values descending.

    Returns (U, s, Vh); Vh is V^H as in numpy.
    """
    return np.linalg.svd(np.asarray(A, dtype=np.complex128), full_matrices=True)


def _check_pd(lam: Array) -> None:
    if lam[0] <= 0 or lam[-1] <= PD_RTOL * lam[0]:
        raise NotPositiveDefiniteError(
            f"matrix is not positive definite (eigenvalue range [{lam[-1]:.3e}, {lam[0]:.3e}])"
        )


def solve_hpd(A: Array, B: Array) -> Array:
    """Solve A X = B for Hermitian positive-definite A.

    Signals non-PD input; the returned X satisfies ||A X - B|| < 1e-10 ||B||
    for the well-conditioned matrices this package produces.
    """
    A = check_hermitian(A)
    lam = np.linalg.eigvalsh(A)
    _check_pd(lam[::-1])
    return np.linalg.solve(A, np.asarray(B, dtype=np.complex128))


def logdet_hpd(A: Array) -> float:
    """log2 |A| for Hermitian positive-definite A."""
    A = check_hermitian(A)
    lam = np.linalg.eigvalsh(A)
    _check_pd(lam[::-1])
    return float(np.sum(np.log2(lam)))


def commutation(p: int, q: int) -> Array:
    """Permutation T (real 0/1) with T^T (X kron Y) T = Y kron X.

    Holds for every p-by-p X and q-by-q Y.  T is pq-by-pq.
    """
    T = np.zeros((p * q, p * q))
    for a in range(p):
        for b in range(q):
            T[a * q + b, b * p + a] = 1.0
    return T


def dft_matrix(n: int) -> Array:
    """Unnormalized n-point DFT matrix W[l,k] = exp(-2j*pi*l*k/n); W W^H = n I."""
    if n < 1:
        raise ValueError("n must be >= 1")
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n)
