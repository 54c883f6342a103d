"""Continuous-to-discrete conversion: feature matrix, low-rank projection DPP
on the dataset, exact discrete sampling, and the explicit error functionals.

Given features psi_k evaluated on the data, the dataset DPP is the m-DPP of
the L-ensemble L = B B^T with B = N^{-1/2} D(rho^{-1/2}) Psi, which equals the
projection DPP onto the top eigenvectors of L. Everything is computed through
the n x n Gram B^T B, never an N x N matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import ProjectionKernel

RANK_RTOL = 1e-10  # eigenvalues below RANK_RTOL * lambda_max are treated as null


def build_feature_matrix(kernel: ProjectionKernel, points: np.ndarray) -> np.ndarray:
    """Psi[i, k] = psi_k(X_i) for X_i in [0,1]^d."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
        raise ValueError("data points must lie inside [0,1]^d")
    return kernel.feature_matrix(pts)


@dataclass(frozen=True)
class DiscreteProjectionDPP:
    """Rank-m projection DPP on an N-point dataset, K = U U^T.

    U has orthonormal columns; eigenvalues are the kept spectrum of L, whose
    distance to 1 measures how faithfully the pipeline discretized.
    """

    basis: np.ndarray        # (N, m) column-orthonormal
    eigenvalues: np.ndarray  # (m,) kept eigenvalues of L, descending
    rank_tol: float

    @property
    def size(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def inclusion_probabilities(self) -> np.ndarray:
        return np.sum(self.basis * self.basis, axis=1)

    def kernel_matrix(self, rows=None, cols=None) -> np.ndarray:
        u = self.basis
        r = u if rows is None else u[rows]
        c = u if cols is None else u[cols]
        return r @ c.T


def build_discrete_dpp(feature_matrix: np.ndarray, rho_at_data: np.ndarray,
                       rank_tol: float = RANK_RTOL) -> DiscreteProjectionDPP:
    """Eigendecompose the n x n Gram of B = N^{-1/2} D(rho^{-1/2}) Psi.

    Keeps eigenpairs above rank_tol * lambda_max; the orthonormal dataset basis
    is U = B V Lambda^{-1/2}. Eigenvector signs are fixed so the largest-
    magnitude entry of each kept column of V is positive.
    """
    psi = np.asarray(feature_matrix, dtype=float)
    if psi.ndim != 2 or psi.shape[0] == 0:
        raise ValueError("feature matrix must be a nonempty N x n array")
    rho = np.asarray(rho_at_data, dtype=float)
    if rho.shape != (psi.shape[0],):
        raise ValueError("need one density value per data point")
    if np.any(rho <= 0.0):
        raise ValueError("density values must be positive")
    b = psi / np.sqrt(psi.shape[0] * rho)[:, None]
    gram = b.T @ b
    eigvals, eigvecs = np.linalg.eigh(gram)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    keep = eigvals > rank_tol * max(eigvals[0], 0.0)
    if not np.any(keep):
        raise ValueError("feature matrix has numerical rank zero")
    lam = eigvals[keep]
    v = eigvecs[:, keep]
    pivot = np.argmax(np.abs(v), axis=0)
    v = v * np.sign(v[pivot, np.arange(v.shape[1])])
    u = (b @ v) / np.sqrt(lam)
    return DiscreteProjectionDPP(basis=u, eigenvalues=lam, rank_tol=rank_tol)


def l_matrix_entries(kernel: ProjectionKernel, points: np.ndarray,
                     rho_at_data: np.ndarray, rows, cols) -> np.ndarray:
    """L_ij = K(X_i, X_j) / (N sqrt(rho_i rho_j)), reproducible cross-check."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    rho = np.asarray(rho_at_data, dtype=float)
    fi = kernel.feature_matrix(pts[rows])
    fj = kernel.feature_matrix(pts[cols])
    kij = fi @ fj.T
    scale = np.sqrt(rho[rows])[:, None] * np.sqrt(rho[cols])[None, :]
    return kij / (pts.shape[0] * scale)


def sample_discrete(dpp: DiscreteProjectionDPP, rng: np.random.Generator) -> np.ndarray:
    """Exact draw of the size-m projection DPP by sequential row projection.

    At each of m steps an index is picked proportionally to the diagonal of
    the residual projection, then the basis rows are projected orthogonally to
    the selected row direction. Cost O(N m^2).
    """
    w = dpp.basis.copy()
    n, m = w.shape
    chosen = np.empty(m, dtype=int)
    for step in range(m):
        diag = np.einsum("ij,ij->i", w, w)
        neg = diag.min()
        if neg < -1e-9:
            raise RuntimeError(f"residual diagonal went negative ({neg:.2e})")
        np.maximum(diag, 0.0, out=diag)
        diag[chosen[:step]] = 0.0
        total = diag.sum()
        if total <= 0.0:
            raise RuntimeError("residual projection vanished early")
        idx = rng.choice(n, p=diag / total)
        chosen[step] = idx
        v = w[idx] / np.sqrt(diag[idx])
        w -= np.outer(w @ v, v)
    return np.sort(chosen)


def inclusion_probability(dpp: DiscreteProjectionDPP, i: int) -> float:
    if not 0 <= i < dpp.size:
        raise IndexError(f"index {i} out of range for {dpp.size} points")
    return float(np.sum(dpp.basis[i] ** 2))


@dataclass(frozen=True)
class TransferBoundInputs:
    """Arguments of the variance-transfer error functionals."""

    n: int
    big_n: int
    delta: float
    delta_prime: float
    kmax: float | None = None
    epsilon: float | None = None
    beta: float | None = None

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0 and 0.0 < self.delta_prime < 1.0):
            raise ValueError("delta and delta_prime must lie in (0,1)")


def error_functional(inp: TransferBoundInputs) -> tuple[float, float]:
    """The explicit transfer errors (E, E_tilde).

    E      = 4 sqrt(2 log(2/d') / N) + (4/(9N^2)) log^2((n^2+1)/d)
             + (4/N) log((n^2+1)/d)
    E_tilde replaces both factors 4 of the log terms by (n+4).
    """
    n, big_n = inp.n, inp.big_n
    log_term = np.log((n**2 + 1) / inp.delta)
    head = 4.0 * np.sqrt(2.0 * np.log(2.0 / inp.delta_prime) / big_n)
    sq = log_term**2 / (9.0 * big_n**2)
    lin = log_term / big_n
    err = head + 4.0 * sq + 4.0 * lin
    err_tilde = head + (n + 4.0) * sq + (n + 4.0) * lin
    return float(err), float(err_tilde)


def variance_transfer_interval(v_continuous: float, f_sup: float, kmax: float,
                               err: float, big_n: int, epsilon: float | None = None,
                               rank: int | None = None) -> tuple[float, float]:
    """[lower, upper] bracket for Var[linear statistic | data] from the
    continuous variance, with the widened form when a density-estimation
    relative error epsilon is supplied (rank = kernel rank n enters the
    epsilon^2 n slack of that form)."""
    c = f_sup**2 * kmax**2 * err
    if epsilon is None:
        lo = (big_n - 1) / (2.0 * big_n) * v_continuous - 2.0 * c
        hi = 2.0 * v_continuous + 4.0 * c
    else:
        if rank is None:
            raise ValueError("the widened bounds need the kernel rank")
        slack = f_sup**2 * epsilon**2 * rank
        lo = ((big_n - 1) / (2.0 * big_n) * (1.0 - epsilon) ** 2 * v_continuous
              - 16.0 * c - 4.0 * slack)
        hi = 2.0 * (1.0 + epsilon) ** 2 * v_continuous + 32.0 * c + 8.0 * slack
    return lo, hi
