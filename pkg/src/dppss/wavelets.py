"""Compactly supported 1-D scaling functions and their dilated tensor products.

Two generators are provided: the Haar indicator (evaluated analytically) and
the Daubechies-2 scaling function, tabulated on a dyadic grid by the cascade
refinement iteration and evaluated by linear interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SQRT2 = np.sqrt(2.0)

# Four-tap Daubechies-2 low-pass filter.
_S3 = np.sqrt(3.0)
DB2_FILTER = np.array([1.0 + _S3, 3.0 + _S3, 3.0 - _S3, 1.0 - _S3]) / (4.0 * SQRT2)

# The slowest cascade mode decays like ((1+sqrt3)/4)^t ~ 0.683^t, so the
# 1e-8 sup-norm stopping rule needs ~49 sweeps; 64 leaves headroom.
CASCADE_TOL = 1e-8
CASCADE_MAX_ITER = 64


def db2_cascade_table(levels: int) -> np.ndarray:
    """Tabulate the Daubechies-2 scaling function on the grid k*2^-levels over [0,3].

    Runs the refinement iteration phi_{t+1}(x) = sqrt(2) sum_k h_k phi_t(2x-k)
    starting from the Haar indicator, until successive tables agree to
    CASCADE_TOL in sup norm.
    """
    if levels < 6:
        raise ValueError(f"cascade needs levels >= 6, got {levels}")
    r = levels
    npts = 3 * 2**r + 1
    idx = np.arange(npts)
    table = np.zeros(npts)
    table[: 2**r] = 1.0  # Haar indicator of [0,1) on the grid
    sources = [2 * idx - k * 2**r for k in range(4)]
    masks = [(s >= 0) & (s < npts) for s in sources]
    for _ in range(CASCADE_MAX_ITER):
        new = np.zeros(npts)
        for k in range(4):
            new[masks[k]] += SQRT2 * DB2_FILTER[k] * table[sources[k][masks[k]]]
        diff = np.max(np.abs(new - table))
        table = new
        if diff < CASCADE_TOL:
            return table
    raise RuntimeError(
        f"db2 cascade did not converge below {CASCADE_TOL:g} "
        f"in {CASCADE_MAX_ITER} iterations (last diff {diff:.3e})"
    )


@dataclass(frozen=True)
class ScalingFunction:
    """Evaluable compactly supported orthonormal scaling function on [a, b].

    Immutable; safe to share across workers.
    """

    kind: str  # "haar" | "daubechies2"
    support: tuple[float, float]
    table: np.ndarray | None = field(default=None, repr=False)
    cascade_levels: int | None = None

    def __call__(self, x):
        """Evaluate phi at x (scalar or array), zero outside the support."""
        x = np.asarray(x, dtype=float)
        if self.kind == "haar":
            return ((x >= 0.0) & (x < 1.0)).astype(float)
        xs_step = 2.0 ** -self.cascade_levels
        return np.interp(x / xs_step, np.arange(self.table.size), self.table,
                         left=0.0, right=0.0)

    @property
    def support_width(self) -> float:
        a, b = self.support
        return b - a

    def first_moment(self) -> float:
        """int x phi(x) dx; the node offset at which point sampling of a
        function reproduces linear behavior through the shift sums."""
        if self.kind == "haar":
            return 0.5
        step = 2.0 ** -self.cascade_levels
        xs = np.arange(self.table.size) * step
        return float(np.trapezoid(xs * self.table, dx=step))


def haar() -> ScalingFunction:
    return ScalingFunction(kind="haar", support=(0.0, 1.0))


def haar_eval(x) -> float:
    """Indicator of [0,1), half-open at the right endpoint."""
    return haar()(x)


def daubechies2_cascade(levels: int = 10) -> ScalingFunction:
    """Daubechies-2 scaling function tabulated at resolution 2^-levels."""
    table = db2_cascade_table(levels)
    return ScalingFunction(kind="daubechies2", support=(0.0, 3.0),
                           table=table, cascade_levels=levels)


def eval_scaling(sf: ScalingFunction, x) -> float:
    return sf(x)


@dataclass(frozen=True)
class TensorWavelet:
    """Dilated, translated tensor product Phi at scale 2^-j and shift k in Z^d.

    Evaluates prod_i 2^{j/2} phi(2^j x_i - k_i); in periodized mode the
    argument is wrapped modulo 2^j before evaluating phi, summing every wrap
    whose argument intersects the support.
    """

    scale: int
    shift: tuple[int, ...]
    dim: int
    periodized: bool = False

    def __post_init__(self):
        if self.scale < 0:
            raise ValueError("scale j must be nonnegative")
        if len(self.shift) != self.dim:
            raise ValueError("shift length must equal dim")

    def eval(self, sf: ScalingFunction, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {x.shape[1]}")
        out = np.ones(x.shape[0])
        for i in range(self.dim):
            t = 2.0**self.scale * x[:, i] - self.shift[i]
            out *= 2.0 ** (self.scale / 2.0) * _eval_shifted(sf, t, self.scale, self.periodized)
        return out if out.size > 1 else float(out[0])


def _eval_shifted(sf: ScalingFunction, t, j: int, periodized: bool):
    """phi(t), or the 2^j-periodization sum_l phi(t + l 2^j) when flagged."""
    t = np.asarray(t, dtype=float)
    if not periodized:
        return sf(t)
    a, b = sf.support
    period = 2.0**j
    lmin = int(np.ceil((a - np.max(t)) / period))
    lmax = int(np.floor((b - np.min(t)) / period))
    out = np.zeros_like(t)
    for l in range(lmin, lmax + 1):
        out += sf(t + l * period)
    return out


def eval_tensor(w: TensorWavelet, sf: ScalingFunction, x):
    return w.eval(sf, x)


def shift_value_matrix(sf: ScalingFunction, j: int, shifts_1d: np.ndarray,
                       coords: np.ndarray, periodized: bool) -> np.ndarray:
    """Matrix of 2^{j/2} phi(2^j coords - k) over all 1-D shifts k.

    coords: (N,) values of one coordinate; returns (N, len(shifts_1d)).
    Shared workhorse for feature matrices; the tensor value at a point is the
    product of one column per dimension.
    """
    t = 2.0**j * coords[:, None] - np.asarray(shifts_1d, dtype=float)[None, :]
    if not periodized:
        return 2.0 ** (j / 2.0) * sf(t)
    a, b = sf.support
    period = 2.0**j
    lmin = int(np.ceil((a - t.max()) / period))
    lmax = int(np.floor((b - t.min()) / period))
    out = np.zeros_like(t)
    for l in range(lmin, lmax + 1):
        out += sf(t + l * period)
    return 2.0 ** (j / 2.0) * out
