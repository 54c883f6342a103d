"""Exact sampling of continuous projection DPPs on [0,1]^d.

Haar kernels route to the stratified shortcut (one uniform point per dyadic
cell, which has exactly the DPP law). Every other kernel goes through a
sequential chain sampler: at step i the conditional density is the residual
kernel diagonal after projecting out the directions of the already accepted
points, and each point is drawn by rejection under a grid-maximized envelope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import ProjectionKernel, WaveletKernel

REJECTION_CAP = 10**6
ENVELOPE_HEADROOM = 1.05
_BATCH = 256


@dataclass(frozen=True)
class ContinuousSample:
    """One draw: exactly `kernel rank` points in [0,1)^d, order-free."""

    points: np.ndarray  # (n, d)
    metadata: dict = field(default_factory=dict)
    seed: int | None = None

    def __len__(self):
        return self.points.shape[0]


def sample_stratified_haar(j: int, d: int, rng: np.random.Generator) -> ContinuousSample:
    """One uniform point in each of the 2^{dj} dyadic cells of [0,1)^d."""
    side = 2**j
    cells = np.stack(np.meshgrid(*[np.arange(side)] * d, indexing="ij"),
                     axis=-1).reshape(-1, d)
    pts = (cells + rng.uniform(size=cells.shape)) / side
    rng.shuffle(pts, axis=0)  # exchangeable output, no cell-order semantics
    return ContinuousSample(points=pts, metadata={"family": "haar", "j": j, "d": d})


def _envelope_grid(kernel: ProjectionKernel) -> np.ndarray:
    """Per-axis maximization grid for the rejection envelope.

    A fixed uniform grid misses sharp residual peaks: wavelet residuals spike
    at dyadic cell boundaries once few points remain, and OPE diagonals spike
    at the domain boundary on a 1/rank^2 scale. The axis grid is therefore
    rank-scaled uniform points, plus cosine-clustered boundary points, plus
    the dyadic lattice four levels below the wavelet scale when applicable.
    """
    dim, rank = kernel.dim, kernel.rank
    m = max(201, 4 * rank + 1)
    pieces = [np.linspace(0.0, 1.0, m),
              0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, m)))]
    if isinstance(kernel, WaveletKernel):
        level = 2 ** (kernel.j + 4)
        pieces.append(np.arange(level + 1) / level)
    axis = np.unique(np.concatenate(pieces))
    if dim == 1:
        return axis[:, None]
    mesh = np.meshgrid(*[axis] * dim, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def sample_projection_chain(kernel: ProjectionKernel,
                            rng: np.random.Generator) -> ContinuousSample:
    """Generic sequential sampler for a rank-n projection DPP.

    Maintains an orthonormal basis E of the used feature directions; the step-i
    conditional density p_i(x) = (K(x,x) - |E^T phi(x)|^2) / (n - i + 1) is
    sampled by rejection with uniform proposals under the envelope
    1.05 * max(p_i on grid).
    """
    n, d = kernel.rank, kernel.dim
    if d > 2:
        raise ValueError("chain sampler supports d <= 2")
    grid = _envelope_grid(kernel)
    fgrid = kernel.feature_matrix(grid)           # (G, n), fixed across steps
    resid_grid = np.sum(fgrid * fgrid, axis=1)    # residual diagonal on the grid
    used = np.zeros((n, 0))
    pts = np.empty((n, d))
    for i in range(n):
        denom = n - i
        env = ENVELOPE_HEADROOM * np.max(resid_grid) / denom
        if env <= 0:
            raise RuntimeError("residual density vanished before rank was reached")
        accepted = None
        tried = 0
        while accepted is None:
            if tried >= REJECTION_CAP:
                raise RuntimeError(f"rejection cap {REJECTION_CAP} exceeded at point {i + 1}")
            cand = rng.uniform(size=(_BATCH, d))
            u = rng.uniform(size=_BATCH)
            fc = kernel.feature_matrix(cand)
            resid = np.sum(fc * fc, axis=1)
            if used.shape[1]:
                proj = fc @ used
                resid = resid - np.sum(proj * proj, axis=1)
            dens = resid / denom
            bad = dens > env
            if np.any(bad & (u * env < dens)):
                raise RuntimeError("rejection envelope violated; maximization grid too coarse")
            hits = np.nonzero(u * env < dens)[0]
            tried += _BATCH
            if hits.size:
                accepted = hits[0]
                phi = fc[accepted]
        pts[i] = cand[accepted]
        w = phi - used @ (used.T @ phi) if used.shape[1] else phi.copy()
        norm = np.linalg.norm(w)
        if norm < 1e-12:
            raise RuntimeError("degenerate feature direction at an accepted point")
        used = np.hstack([used, (w / norm)[:, None]])
        resid_grid = resid_grid - (fgrid @ (w / norm)) ** 2
        np.maximum(resid_grid, 0.0, out=resid_grid)
    rng.shuffle(pts, axis=0)  # exchangeable output, no draw-order semantics
    return ContinuousSample(points=pts, metadata=dict(kernel.metadata))


def sample_continuous(kernel: ProjectionKernel,
                      rng: np.random.Generator) -> ContinuousSample:
    """Draw from DPP(K, dx), using the stratified shortcut for Haar kernels."""
    if isinstance(kernel, WaveletKernel) and kernel.sf.kind == "haar":
        return sample_stratified_haar(kernel.j, kernel.dim, rng)
    return sample_projection_chain(kernel, rng)
