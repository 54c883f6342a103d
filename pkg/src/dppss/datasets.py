"""Dataset ingestion: synthetic GMM, MNIST IDX parsing, PCA reduction, CSV.

Every dataset ends up as N distinct points in [0,1]^d together with the
affine rescaling that produced those coordinates, so downstream results can
be mapped back to the original scale.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

DATA_DIR_ENV = "DPPSS_DATA_DIR"

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

# interior margin of the PCA rescaling; keeps points away from the kernel
# domain boundary where wavelet supports end
RESCALE_LO = 0.02
RESCALE_HI = 0.98


@dataclass(frozen=True)
class RescaleRecord:
    """Per-dimension affine map applied to raw coordinates: unit = (raw - lo) * scale + off."""

    lo: np.ndarray
    hi: np.ndarray
    out_lo: float
    out_hi: float

    def forward(self, raw: np.ndarray) -> np.ndarray:
        span = self.hi - self.lo
        return (raw - self.lo) / span * (self.out_hi - self.out_lo) + self.out_lo

    def inverse(self, unit: np.ndarray) -> np.ndarray:
        span = self.hi - self.lo
        return (unit - self.out_lo) / (self.out_hi - self.out_lo) * span + self.lo


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray  # (N, d) in [0,1]^d
    labels: np.ndarray | None = None
    provenance: str = "unknown"
    rescale: RescaleRecord | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = self.points
        if pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
            raise ValueError("dataset coordinates must lie in [0,1]")
        if pts.shape[0] != len(np.unique(pts, axis=0)):
            raise ValueError("dataset points must be pairwise distinct")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


GMM_CENTERS = np.array([
    [np.sqrt(2.0) / 2.0, np.sqrt(2.0) / 2.0],
    [-np.sqrt(2.0) / 2.0, -np.sqrt(2.0) / 2.0],
    [0.0, 0.0],
])
# Adjacent centers sit 4 sigma apart, so the three modes stay well separated
# while each still spreads over enough dyadic strata for rank-64 pipelines.
GMM_STD = 0.25


def gen_gmm_trimodal(n: int, seed: int) -> Dataset:
    """Balanced trimodal Gaussian mixture truncated to [-1,1]^2, rescaled to [0,1]^2.

    Component assignment is round-robin so per-component counts differ by at
    most one; out-of-square draws are rejected and redrawn.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 3
    raw = np.empty((n, 2))
    for i, lab in enumerate(labels):
        while True:
            x = GMM_CENTERS[lab] + GMM_STD * rng.standard_normal(2)
            if np.all(np.abs(x) <= 1.0):
                raw[i] = x
                break
    rec = RescaleRecord(lo=np.array([-1.0, -1.0]), hi=np.array([1.0, 1.0]),
                        out_lo=0.0, out_hi=1.0)
    return Dataset(points=rec.forward(raw), labels=labels, provenance="gmm",
                   rescale=rec, meta={"seed": seed, "raw_support": "[-1,1]^2"})


TWO_CLASS_CENTERS = (0.32, 0.68)
TWO_CLASS_STD = 0.45


def gen_two_class_gaussians(n: int, seed: int) -> Dataset:
    """Balanced two-class Gaussian blobs truncated to (0,1)^2.

    Wide enough that each class occupies every level-2 dyadic cell (so rank-16
    per-class wavelet pipelines are feasible) yet separated enough that hinge
    descent visibly learns.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rng = np.random.default_rng(seed)
    sizes = (n - n // 2, n // 2)
    blocks, labels = [], []
    for cls, (center, size) in enumerate(zip(TWO_CLASS_CENTERS, sizes)):
        pts = np.empty((size, 2))
        got = 0
        while got < size:
            draw = center + TWO_CLASS_STD * rng.standard_normal((size, 2))
            keep = draw[np.all((draw > 0.0) & (draw < 1.0), axis=1)]
            take = min(size - got, keep.shape[0])
            pts[got:got + take] = keep[:take]
            got += take
        blocks.append(pts)
        labels.append(np.full(size, cls, dtype=int))
    return Dataset(points=np.vstack(blocks), labels=np.concatenate(labels),
                   provenance="gauss2", meta={"seed": seed})


def _read_exact(fh, nbytes: int, what: str) -> bytes:
    buf = fh.read(nbytes)
    if len(buf) != nbytes:
        raise ValueError(f"truncated IDX file while reading {what}")
    return buf


def load_mnist_idx(images_path: str, labels_path: str,
                   digits: tuple[int, ...] = (4, 9),
                   limit: int | None = 1000) -> tuple[np.ndarray, np.ndarray]:
    """Parse big-endian IDX image/label files, filter digits, balance classes.

    Returns (raw 784-d float array scaled to [0,1], labels). Feed the result
    through pca_project to obtain a Dataset on [0,1]^d.
    """
    if not digits:
        raise ValueError("digit filter must be nonempty")
    with open(images_path, "rb") as fh:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, "image header"))
        if magic != IDX_IMAGE_MAGIC:
            raise ValueError(f"bad image magic 0x{magic:08x}")
        pixels = np.frombuffer(_read_exact(fh, count * rows * cols, "pixels"),
                               dtype=np.uint8)
    images = pixels.reshape(count, rows * cols).astype(float) / 255.0
    with open(labels_path, "rb") as fh:
        magic, lcount = struct.unpack(">II", _read_exact(fh, 8, "label header"))
        if magic != IDX_LABEL_MAGIC:
            raise ValueError(f"bad label magic 0x{magic:08x}")
        labels = np.frombuffer(_read_exact(fh, lcount, "labels"), dtype=np.uint8)
    if lcount != count:
        raise ValueError(f"label/image count mismatch: {lcount} vs {count}")
    keep_img, keep_lab = [], []
    per_class = None if limit is None else limit // len(digits)
    for digit in digits:
        idx = np.nonzero(labels == digit)[0]
        if per_class is not None:
            idx = idx[:per_class]
        keep_img.append(images[idx])
        keep_lab.append(np.full(idx.size, digit))
    return np.concatenate(keep_img), np.concatenate(keep_lab)


def pca_project(raw: np.ndarray, target_dim: int,
                labels: np.ndarray | None = None,
                provenance: str = "csv") -> Dataset:
    """Center, project onto the top principal axes, rescale into the interior.

    Component signs follow the largest-magnitude loading so the projection is
    platform-reproducible; each output coordinate is min-max mapped to
    [RESCALE_LO, RESCALE_HI].
    """
    x = np.atleast_2d(np.asarray(raw, dtype=float))
    if target_dim > x.shape[1]:
        raise ValueError("target dimension exceeds ambient dimension")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / max(x.shape[0] - 1, 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:target_dim]
    if eigvals[order[-1]] <= 1e-12 * max(eigvals.max(), 1.0):
        raise ValueError("covariance rank below the target dimension")
    comps = eigvecs[:, order]
    pivot = np.argmax(np.abs(comps), axis=0)
    comps = comps * np.sign(comps[pivot, np.arange(comps.shape[1])])
    proj = centered @ comps
    lo, hi = proj.min(axis=0), proj.max(axis=0)
    rec = RescaleRecord(lo=lo, hi=hi, out_lo=RESCALE_LO, out_hi=RESCALE_HI)
    return Dataset(points=rec.forward(proj), labels=labels, provenance=provenance,
                   rescale=rec, meta={"explained_variance": eigvals[order].tolist()})


def load_points_csv(path: str, provenance: str = "csv") -> Dataset:
    """Whitespace/comma separated numeric file; last column is an integer label
    when it holds only whole numbers with at most 32 distinct values."""
    arr = np.loadtxt(path, delimiter=",", ndmin=2)
    labels = None
    if arr.shape[1] >= 2:
        last = arr[:, -1]
        if np.allclose(last, np.round(last)) and np.unique(last).size <= 32:
            labels = last.astype(int)
            arr = arr[:, :-1]
    if arr.min() >= 0.0 and arr.max() <= 1.0:
        rec = None
        pts = arr
    else:
        lo, hi = arr.min(axis=0), arr.max(axis=0)
        rec = RescaleRecord(lo=lo, hi=hi, out_lo=RESCALE_LO, out_hi=RESCALE_HI)
        pts = rec.forward(arr)
    return Dataset(points=pts, labels=labels, provenance=provenance, rescale=rec)


def resolve_data_path(name: str) -> str:
    """Look up a dataset file, trying DPPSS_DATA_DIR when the path is relative."""
    if os.path.isabs(name) or os.path.exists(name):
        return name
    base = os.environ.get(DATA_DIR_ENV)
    if base:
        candidate = os.path.join(base, name)
        if os.path.exists(candidate):
            return candidate
    return name
