"""Linear statistics, quadrature and coreset estimators, exact variances,
and the library of test integrands.

All point sets are (m, d) arrays and all integrands are callables mapping an
(m, d) array to an (m,) array; TestFunction wraps the library integrands with
their regularity metadata.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .discretize import DiscreteProjectionDPP
from .kernels import ProjectionKernel, WaveletKernel

QUAD_ABS_TOL = 1e-10
HOLDER_DEPTH = 16  # finest roughness scale 2^-16 of the lacunary family


def linear_statistic(points: np.ndarray, f) -> float:
    """Sum of f over the configuration."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        return 0.0
    return float(np.sum(f(pts)))


def quadrature_basic(points: np.ndarray, kernel: ProjectionKernel, f,
                     weight=None) -> float:
    """sum_i f(Y_i) w(Y_i) / K(Y_i, Y_i), unbiased for the integral of f w."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    diag = kernel.diag(pts)
    if np.any(diag <= 0.0):
        raise ValueError("kernel diagonal vanishes at a sample point")
    vals = f(pts)
    if weight is not None:
        vals = vals * weight(pts)
    return float(np.sum(vals / diag))


def support_centers(kernel: WaveletKernel) -> np.ndarray:
    """Center of each wavelet support, one point per index.

    Centers of periodized supports are wrapped into [0,1)."""
    boxes = kernel.support_boxes()
    centers = boxes.mean(axis=2)
    if kernel.mode == "periodized":
        centers = np.mod(centers, 1.0)
    return centers


def design_nodes(kernel: WaveletKernel) -> np.ndarray:
    """Default design points: the first-moment node of each wavelet support.

    At (k + int x phi) / 2^j the shift sums reproduce linear functions, so
    control-variate corrections built on these nodes track smooth integrands
    to second order; for Haar this is the cell center.
    """
    mu = kernel.sf.first_moment()
    nodes = (kernel.index_set.shifts + mu) / 2.0**kernel.j
    if kernel.mode == "periodized":
        nodes = np.mod(nodes, 1.0)
    return nodes


def quadrature_adjusted(points: np.ndarray, kernel: WaveletKernel, f,
                        weight, design_points: np.ndarray | None = None) -> float:
    """Control-variate form of the wavelet quadrature.

    Subtracts 2^{-dj/2} sum_i sum_k Phi_k(Y_i)/K(Y_i,Y_i) f(x_k) w(x_k) and
    adds back 2^{-dj} sum_k f(x_k) w(x_k) for design points x_k, one inside
    each wavelet support; stays unbiased and flattens the kernel-diagonal
    fluctuations of the basic estimator.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if design_points is None:
        design_points = support_centers(kernel)
    dp = np.atleast_2d(np.asarray(design_points, dtype=float))
    if dp.shape[0] != kernel.rank:
        raise ValueError("need one design point per kernel index")
    d, j = kernel.dim, kernel.j
    fw = f(dp)
    fw = fw * weight(dp)
    feats = kernel.feature_matrix(pts)
    diag = np.sum(feats * feats, axis=1)
    if np.any(diag <= 0.0):
        raise ValueError("kernel diagonal vanishes at a sample point")
    base = quadrature_basic(pts, kernel, f, weight)
    cross = float(np.sum((feats @ fw) / diag))
    return base - 2.0 ** (-d * j / 2.0) * cross + 2.0 ** (-d * j) * float(np.sum(fw))


def coreset_estimate(indices, dpp: DiscreteProjectionDPP, f,
                     points: np.ndarray) -> float:
    """sum_{i in S} f(X_i) / K_ii, conditionally unbiased for sum_x f(x)."""
    idx = np.asarray(indices, dtype=int)
    incl = dpp.inclusion_probabilities()[idx]
    if np.any(incl <= 0.0):
        raise ValueError("zero inclusion probability in the selected subset")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return float(np.sum(f(pts[idx]) / incl))


def coreset_control_values(kernel: WaveletKernel, feature_matrix: np.ndarray,
                           f, design_points: np.ndarray | None = None) -> np.ndarray:
    """Values over the dataset of the wavelet quasi-interpolant of f.

    g(x) = 2^{-dj/2} sum_k Phi_k(x) f(x_k) built from design points; its full
    dataset sum is exact, so g serves as a control variate for the coreset
    estimator: sum_S (f - g)/K_ii + sum_X g stays unbiased for sum_X f while
    the subset only has to estimate the small remainder f - g.
    """
    if design_points is None:
        design_points = design_nodes(kernel)
    fd = f(np.atleast_2d(np.asarray(design_points, dtype=float)))
    return 2.0 ** (-kernel.dim * kernel.j / 2.0) * (feature_matrix @ fd)


def coreset_estimate_adjusted(indices, dpp: DiscreteProjectionDPP, fvals: np.ndarray,
                              control_vals: np.ndarray) -> float:
    """Control-variate coreset estimator from precomputed value tables."""
    idx = np.asarray(indices, dtype=int)
    incl = dpp.inclusion_probabilities()[idx]
    if np.any(incl <= 0.0):
        raise ValueError("zero inclusion probability in the selected subset")
    rem = fvals[idx] - control_vals[idx]
    return float(np.sum(rem / incl) + np.sum(control_vals))


def continuous_variance_exact(kernel: ProjectionKernel, f,
                              points_per_axis: int | None = None) -> float:
    """Var of the linear statistic under DPP(K, dx) by tensor-grid quadrature.

    Integrates f^2 K(x,x) - int int f(x) f(y) K(x,y)^2 on the midpoints of a
    grid with 2001 axis points at d=1 (301 at d=2); midpoints keep dyadic
    kernel discontinuities on interval boundaries, so piecewise-constant
    cases come out exact.
    """
    d = kernel.dim
    if d > 2:
        raise ValueError("exact continuous variance supported for d <= 2")
    m = (points_per_axis or (2001 if d == 1 else 301)) - 1
    axis = (np.arange(m) + 0.5) / m
    if d == 1:
        pts = axis[:, None]
        w = np.full(m, 1.0 / m)
    else:
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
        w = np.full(m * m, 1.0 / (m * m))
    feats = kernel.feature_matrix(pts)
    fv = f(pts)
    diag = np.sum(feats * feats, axis=1)
    first = float(np.sum(w * fv * fv * diag))
    # int int f f K^2 = ||F^T diag(w f) F||_F^2 via the feature expansion
    a = feats.T @ (feats * (w * fv)[:, None])
    return first - float(np.sum(a * a))


def discrete_variance_exact(dpp: DiscreteProjectionDPP, fvals: np.ndarray,
                            weights: np.ndarray | None = None,
                            max_points: int = 50_000) -> float:
    """Exact conditional variance (1/2) sum_ij (g_i - g_j)^2 K_ij^2 with
    g = f or g = w f.

    Because K = U U^T is a projection, sum_j K_ij^2 = K_ii and the double sum
    collapses to ||U^T diag(g) U||_F^2, so the exact value costs O(N m^2)
    instead of forming any K_ij block.
    """
    g = np.asarray(fvals, dtype=float)
    if weights is not None:
        g = g * np.asarray(weights, dtype=float)
    u = dpp.basis
    if u.shape[0] > max_points:
        raise ValueError(f"N = {u.shape[0]} exceeds the cost guard {max_points}")
    incl = np.einsum("ij,ij->i", u, u)
    a = u.T @ (g[:, None] * u)
    return float(np.sum(g * g * incl) - np.sum(a * a))


@dataclass(frozen=True)
class TestFunction:
    """Evaluable integrand with its declared regularity and support metadata.

    Library functions built from a single 1-D profile record it (normalized)
    in `profile` together with the combination rule in `structure`, which the
    integral oracle exploits to reduce d-dimensional truths to adaptive 1-D
    quadrature.
    """

    name: str
    fn: object = field(repr=False)
    dim: int
    regularity: str  # e.g. "holder:0.75", "lipschitz", "smooth"
    vanishes_on_boundary: bool
    params: dict = field(default_factory=dict)
    factor: object = field(default=None, repr=False)  # raw 1-D profile
    profile: object = field(default=None, repr=False)  # normalized 1-D profile
    structure: str = "opaque"  # "mean" | "product" | "opaque"
    singular_points: tuple = ()
    # (amplitude, integer frequency) decomposition "1 + sum a cos(2 pi f t)" of
    # the profile, when it has one; lets the oracle use oscillatory quadrature
    cosine_terms: tuple = ()

    def __call__(self, pts):
        return self.fn(np.atleast_2d(np.asarray(pts, dtype=float)))

    def sup_on_grid(self, points_per_axis: int = 401) -> float:
        axes = [np.linspace(0.0, 1.0, points_per_axis)] * self.dim
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        return float(np.max(np.abs(self(mesh))))


def _gamma_profile(gamma: float):
    return lambda t: np.abs(np.asarray(t, dtype=float) - 0.5) ** gamma


def _mixcos_profile(t):
    t = np.asarray(t, dtype=float)
    return 0.1 * np.abs(np.cos(5.0 * np.pi * (t - 0.5))) + (t - 0.5) ** 2


# kinks of |cos(5 pi (t - 1/2))| inside (0,1)
_MIXCOS_KINKS = (0.1, 0.3, 0.5, 0.7, 0.9)


def _bump_profile(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = (t > 0.0) & (t < 1.0)
    ti = t[inside]
    out[inside] = np.exp(-0.1 / (ti * (1.0 - ti)))
    return out


def _holder_profile(s: float):
    ks = np.arange(HOLDER_DEPTH + 1)
    amps = 2.0 ** (-s * ks)
    freqs = 2.0**ks

    def profile(t):
        t = np.asarray(t, dtype=float)
        return 1.0 + np.sum(amps * np.cos(2.0 * np.pi * freqs * t[..., None]), axis=-1)

    return profile


def integrate_profile(profile, singular_at=None) -> float:
    """Adaptive 1-D quadrature of a profile on [0,1] to QUAD_ABS_TOL."""
    pts = [p for p in (singular_at or []) if 0.0 < p < 1.0]
    val, _ = quad(lambda t: float(profile(np.array([t]))[0]), 0.0, 1.0,
                  points=pts or None, limit=400, epsabs=QUAD_ABS_TOL, epsrel=1e-12)
    return val


def _mean_of_profiles(profile, d: int, norm: float):
    def fn(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.mean(profile(pts), axis=1) / norm
    return fn


def _product_of_profiles(profile, d: int, norm: float):
    def fn(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.prod(profile(pts) / norm, axis=1)
    return fn


def make_test_function(name: str, d: int = 1, **params) -> TestFunction:
    """Library of experiment integrands.

    gamma(gamma=...)   normalized |t - 1/2|^gamma kink profile, averaged over
                       coordinates; rough only at the kink, so its quadrature
                       MSE decays at the Sobolev-scale rate.
    holder(s=...)      lacunary cosine profile with uniform Hoelder-s roughness
                       across all dyadic scales down to 2^-HOLDER_DEPTH; mean
                       one, saturates the n^{-1-2s/d} rate.
    mixcos             0.1 |cos(5 pi (t-1/2))| + (t-1/2)^2, normalized.
    bump               smooth product bump exp(-0.1/(t(1-t))), normalized.
    kmeans_loss(centers=...)  x -> min_c |x - c|^2.
    hinge_loss(theta=..., label=...)  x -> max(0, 1 - label <theta, x>).
    """
    if name == "gamma":
        g = float(params["gamma"])
        prof = _gamma_profile(g)
        norm = 2.0**-g / (g + 1.0)  # exact integral of |t-1/2|^g
        return TestFunction(name=f"gamma({g:g})", fn=_mean_of_profiles(prof, d, norm),
                            dim=d, regularity=f"holder:{min(g, 1.0):g}",
                            vanishes_on_boundary=False, params={"gamma": g},
                            factor=prof, profile=lambda t: prof(t) / norm,
                            structure="mean", singular_points=(0.5,))
    if name == "holder":
        s = float(params["s"])
        prof = _holder_profile(s)
        terms = tuple((2.0 ** (-s * k), 2**k) for k in range(HOLDER_DEPTH + 1))
        return TestFunction(name=f"holder({s:g})", fn=_mean_of_profiles(prof, d, 1.0),
                            dim=d, regularity=f"holder:{s:g}",
                            vanishes_on_boundary=False, params={"s": s},
                            factor=prof, profile=prof, structure="mean",
                            cosine_terms=terms)
    if name == "mixcos":
        norm = integrate_profile(_mixcos_profile, singular_at=_MIXCOS_KINKS)
        return TestFunction(name="mixcos", fn=_mean_of_profiles(_mixcos_profile, d, norm),
                            dim=d, regularity="holder:1",
                            vanishes_on_boundary=False, factor=_mixcos_profile,
                            profile=lambda t: _mixcos_profile(t) / norm,
                            structure="mean", singular_points=_MIXCOS_KINKS)
    if name == "bump":
        norm = integrate_profile(_bump_profile)
        return TestFunction(name="bump", fn=_product_of_profiles(_bump_profile, d, norm),
                            dim=d, regularity="smooth",
                            vanishes_on_boundary=True, factor=_bump_profile,
                            profile=lambda t: _bump_profile(t) / norm,
                            structure="product")
    if name == "kmeans_loss":
        centers = np.atleast_2d(np.asarray(params["centers"], dtype=float))

        def kmeans_fn(pts):
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            d2 = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
            return d2.min(axis=1)

        return TestFunction(name="kmeans_loss", fn=kmeans_fn, dim=centers.shape[1],
                            regularity="holder:1", vanishes_on_boundary=False,
                            params={"k": centers.shape[0]})
    if name == "hinge_loss":
        theta = np.asarray(params["theta"], dtype=float)
        label = float(params.get("label", 1.0))

        def hinge_fn(pts):
            pts = np.atleast_2d(np.asarray(pts, dtype=float))
            return np.maximum(0.0, 1.0 - label * (pts @ theta))

        return TestFunction(name="hinge_loss", fn=hinge_fn, dim=theta.size,
                            regularity="holder:1", vanishes_on_boundary=False,
                            params={"label": label})
    raise ValueError(f"unknown test function {name!r}")


def _profile_integral(tf: TestFunction, weight_profile=None, wsing=()) -> float:
    """1-D integral of tf's normalized profile against an optional weight.

    Cosine-decomposed profiles go through the oscillatory (cosine-weighted)
    Clenshaw-Curtis rule term by term; adaptive subdivision alone cannot track
    frequencies of order 2^HOLDER_DEPTH.
    """
    if tf.cosine_terms:
        if weight_profile is None:
            return 1.0  # integer frequencies: every cosine integrates to zero
        base = integrate_profile(weight_profile, singular_at=wsing)
        for amp, freq in tf.cosine_terms:
            osc, _ = quad(lambda t: float(weight_profile(np.array([t]))[0]),
                          0.0, 1.0, weight="cos", wvar=2.0 * np.pi * freq,
                          limit=400, epsabs=QUAD_ABS_TOL, epsrel=1e-12)
            base += amp * osc
        return base
    if weight_profile is None:
        return integrate_profile(tf.profile, singular_at=list(tf.singular_points))
    return integrate_profile(lambda t: tf.profile(t) * weight_profile(t),
                             singular_at=list(tf.singular_points) + list(wsing))


def integral_oracle(tf: TestFunction, weight: TestFunction | None = None) -> float:
    """Ground-truth integral of tf (times an optional weight) over [0,1]^d.

    Uses adaptive 1-D quadrature on the normalized profiles, combined through
    the mean/product structure; this stays fully independent of the DPP
    estimators it benchmarks.
    """
    if tf.profile is None or tf.structure == "opaque":
        raise ValueError("integral oracle needs a profile-structured function")
    if weight is None:
        one = _profile_integral(tf)
        return one if tf.structure == "mean" else one**tf.dim
    if weight.structure != "product":
        raise ValueError("weights must have product structure")
    fw = _profile_integral(tf, weight.profile, wsing=list(weight.singular_points))
    if tf.structure == "product":
        return fw**tf.dim
    w_one = integrate_profile(weight.profile)
    return fw * w_one ** (tf.dim - 1)
