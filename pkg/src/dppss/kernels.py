"""Rank-n projection kernels on [0,1]^d: wavelet kernels and the Legendre OPE.

A kernel is K(x,y) = sum_k phi_k(x) phi_k(y) for n orthonormal feature
functions; everything downstream (samplers, discretization, variance
formulas) consumes kernels through the feature matrix.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_legendre

from .wavelets import ScalingFunction, shift_value_matrix


@dataclass(frozen=True)
class WaveletIndexSet:
    """Shift indices k in Z^d whose tensor wavelet participates in the kernel.

    Interior mode keeps k with supp(Phi) inside [0,1]^d, i.e. per coordinate
    ceil(-a) <= k_i <= floor(2^j - b); periodized mode takes one full period
    {0, ..., 2^j - 1} per coordinate.
    """

    j: int
    d: int
    mode: str  # "interior" | "periodized"
    shifts: np.ndarray = field(repr=False)  # (n, d) int array

    @property
    def n(self) -> int:
        return self.shifts.shape[0]


def wavelet_index_set(sf: ScalingFunction, j: int, d: int, mode: str) -> WaveletIndexSet:
    if j < 0:
        raise ValueError("scale j must be nonnegative")
    if mode not in ("interior", "periodized"):
        raise ValueError(f"unknown mode {mode!r}")
    a, b = sf.support
    if mode == "interior":
        lo = math.ceil(-a)
        hi = math.floor(2**j - b)
        if hi < lo:
            raise ValueError("scale too coarse for support")
        per_dim = np.arange(lo, hi + 1)
    else:
        per_dim = np.arange(0, 2**j)
    shifts = np.array(list(itertools.product(per_dim, repeat=d)), dtype=int)
    return WaveletIndexSet(j=j, d=d, mode=mode, shifts=shifts)


class ProjectionKernel:
    """Base interface: rank, dimension, feature matrix, pointwise evaluation."""

    rank: int
    dim: int
    metadata: dict

    def feature_matrix(self, points: np.ndarray) -> np.ndarray:
        """(N, rank) matrix of feature values at the given (N, dim) points."""
        raise NotImplementedError

    def _check_points(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {pts.shape[1]}")
        return pts

    def __call__(self, x, y) -> float:
        fx = self.feature_matrix(self._check_points(x))
        fy = self.feature_matrix(self._check_points(y))
        out = np.sum(fx * fy, axis=1)
        return float(out[0]) if out.size == 1 else out

    def diag(self, points) -> np.ndarray:
        f = self.feature_matrix(self._check_points(points))
        return np.sum(f * f, axis=1)

    def feature_functions(self):
        """The n orthonormal features as individual callables on (N, d) arrays."""
        return [lambda pts, k=k: self.feature_matrix(np.atleast_2d(pts))[:, k]
                for k in range(self.rank)]

    def kmax_on_grid(self, points_per_axis: int = 501) -> float:
        """sup of K(x,x) over a tensor grid, the A1 diagnostic for uniform rho."""
        axes = [np.linspace(0.0, 1.0, points_per_axis)] * self.dim
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        return float(np.max(self.diag(mesh)))


class WaveletKernel(ProjectionKernel):
    """K(x,y) = sum_{k in I(j)} Phi_{-j,k}(x) Phi_{-j,k}(y) on [0,1]^d."""

    def __init__(self, sf: ScalingFunction, index_set: WaveletIndexSet):
        self.sf = sf
        self.index_set = index_set
        self.rank = index_set.n
        self.dim = index_set.d
        self.j = index_set.j
        self.mode = index_set.mode
        self.metadata = {"family": "wavelet", "kind": sf.kind,
                         "j": self.j, "mode": self.mode}
        # per-dimension shift values and the gather index of each feature
        self._per_dim = np.unique(index_set.shifts[:, 0])
        base = self._per_dim[0]
        self._gather = index_set.shifts - base  # (n, d) positions into per-dim columns

    def feature_matrix(self, points: np.ndarray) -> np.ndarray:
        pts = self._check_points(points)
        per = self.mode == "periodized"
        cols = [shift_value_matrix(self.sf, self.j, self._per_dim, pts[:, i], per)
                for i in range(self.dim)]
        out = cols[0][:, self._gather[:, 0]]
        for i in range(1, self.dim):
            out = out * cols[i][:, self._gather[:, i]]
        return out

    def support_boxes(self) -> np.ndarray:
        """(n, d, 2) unperiodized support intervals [(a+k)/2^j, (b+k)/2^j]."""
        a, b = self.sf.support
        k = self.index_set.shifts.astype(float)
        lo = (a + k) / 2.0**self.j
        hi = (b + k) / 2.0**self.j
        return np.stack([lo, hi], axis=-1)


def wavelet_kernel(sf: ScalingFunction, j: int, d: int, mode: str = "interior") -> WaveletKernel:
    """Projection kernel spanned by the scale-j tensor scaling functions."""
    return WaveletKernel(sf, wavelet_index_set(sf, j, d, mode))


def graded_lex_indices(d: int, n: int) -> list[tuple[int, ...]]:
    """First n multi-indices in graded order, descending lex within a grade.

    Grade 1 in d=2 enumerates (1,0) before (0,1), matching the usual
    1, x, y, x^2, xy, y^2 monomial listing.
    """
    out: list[tuple[int, ...]] = []
    grade = 0
    while len(out) < n:
        block = [idx for idx in itertools.product(range(grade + 1), repeat=d)
                 if sum(idx) == grade]
        block.sort(reverse=True)
        out.extend(block)
        grade += 1
    return out[:n]


class OPEKernel(ProjectionKernel):
    """Tensorized shifted-Legendre projection kernel, orthonormal for the
    uniform measure on [0,1]^d, features ordered by graded degree."""

    def __init__(self, d: int, n: int):
        if n < 1:
            raise ValueError("rank n must be >= 1")
        self.rank = n
        self.dim = d
        self.indices = np.array(graded_lex_indices(d, n), dtype=int)
        self.metadata = {"family": "ope"}
        self._max_deg = int(self.indices.max())

    def feature_matrix(self, points: np.ndarray) -> np.ndarray:
        pts = self._check_points(points)
        degs = np.arange(self._max_deg + 1)
        norm = np.sqrt(2.0 * degs + 1.0)
        out = np.ones((pts.shape[0], self.rank))
        for i in range(self.dim):
            u = 2.0 * pts[:, i] - 1.0
            vals = eval_legendre(degs[None, :], u[:, None]) * norm[None, :]
            out *= vals[:, self.indices[:, i]]
        return out


def ope_kernel(d: int, n: int) -> OPEKernel:
    return OPEKernel(d, n)


def kernel_eval(kernel: ProjectionKernel, x, y):
    return kernel(x, y)


def gram_matrix(kernel: ProjectionKernel, points_per_axis: int = 2001) -> np.ndarray:
    """Feature Gram matrix by tensor-grid trapezoid quadrature (d <= 2).

    At d=2 the grid is traversed one row of the tensor product at a time so
    the full (points^2, n) feature matrix is never materialized.
    """
    if kernel.dim > 2:
        raise ValueError("gram check supported for d <= 2 only")
    axis = np.linspace(0.0, 1.0, points_per_axis)
    w1 = np.full(points_per_axis, 1.0 / (points_per_axis - 1))
    w1[0] *= 0.5
    w1[-1] *= 0.5
    if kernel.dim == 1:
        f = kernel.feature_matrix(axis[:, None])
        return (f * w1[:, None]).T @ f
    gram = np.zeros((kernel.rank, kernel.rank))
    for i, x in enumerate(axis):
        row = np.stack([np.full(points_per_axis, x), axis], axis=1)
        f = kernel.feature_matrix(row)
        gram += (f * (w1[i] * w1)[:, None]).T @ f
    return gram
