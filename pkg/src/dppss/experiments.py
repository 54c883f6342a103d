"""Experiment drivers: quadrature variance decay, k-means coresets, Pegasos
minibatch SGD, with deterministic seeding and CSV emission.

Every trial draws its own generator from a 64-bit splitmix mix of the master
seed and the trial coordinates, so trial loops can run concurrently without
sharing streams and reruns are byte-identical.
"""

from __future__ import annotations

import functools
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .continuous import sample_continuous
from .datasets import Dataset
from .density import KernelDensityEstimate
from .discretize import DiscreteProjectionDPP, build_discrete_dpp, build_feature_matrix
from .estimators import (TestFunction, coreset_estimate, design_nodes,
                         quadrature_adjusted, quadrature_basic, make_test_function)
from .kernels import ProjectionKernel, ope_kernel, wavelet_kernel
from .wavelets import daubechies2_cascade, haar

_M64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

QUADRATURE_COLUMNS = ("sampler", "fn", "d", "n", "trials", "variance", "slope")
CORESET_COLUMNS = ("sampler", "k", "m", "size", "replicas", "candidates", "q90")
PEGASOS_COLUMNS = ("sampler", "t", "metric", "value", "stderr")


def mix_seed(master: int, *parts) -> int:
    """Derive an independent 64-bit stream id: fold each part (ints, or
    strings via crc32) into the state with the golden-ratio increment, then
    apply the splitmix64 finalizer. Hash-randomization-free by construction."""
    x = master & _M64
    for p in parts:
        if isinstance(p, str):
            p = zlib.crc32(p.encode("utf-8"))
        x = (x + _GAMMA + (int(p) & _M64)) & _M64
        x ^= x >> 30
        x = (x * 0xBF58476D1CE4E5B9) & _M64
        x ^= x >> 27
        x = (x * 0x94D049BB133111EB) & _M64
        x ^= x >> 31
    return x


def trial_rng(master: int, *parts) -> np.random.Generator:
    return np.random.default_rng(mix_seed(master, *parts))


@dataclass(frozen=True)
class ExperimentRecord:
    experiment: str
    sampler: str
    size: int
    trial: int
    seed: int
    metric: str
    value: float


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: str, columns: tuple[str, ...], rows: list[dict]) -> None:
    """Deterministic CSV: fixed header, rows sorted lexicographically on the
    formatted key columns, shortest round-trip float formatting."""
    lines = [",".join(columns)]
    formatted = sorted(tuple(_fmt(r[c]) for c in columns) for r in rows)
    lines.extend(",".join(row) for row in formatted)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


@functools.lru_cache(maxsize=4)
def _db2(levels: int = 10):
    return daubechies2_cascade(levels)


def wavelet_scale(n: int, d: int) -> int:
    j = round(np.log2(n) / d)
    if 2 ** (d * j) != n:
        raise ValueError(f"wavelet samplers need n = 2^(d j); got n={n}, d={d}")
    return j


def continuous_kernel(sampler: str, d: int, n: int) -> ProjectionKernel:
    """The continuous kernel behind a sampler id at rank n."""
    if sampler == "haar":
        return wavelet_kernel(haar(), wavelet_scale(n, d), d, "interior")
    if sampler == "db2":
        return wavelet_kernel(_db2(), wavelet_scale(n, d), d, "periodized")
    if sampler == "ope":
        return ope_kernel(d, n)
    if sampler == "vdm-skip":
        raise ValueError("the discrete-OPE comparator is not implemented; "
                         "use one of iid, haar, db2, ope")
    raise ValueError(f"unknown sampler {sampler!r}")


def pipeline_dpp(sampler: str, points: np.ndarray, m: int,
                 kde_kernel: str = "epanechnikov",
                 allow_rank_deficit: bool = False) -> DiscreteProjectionDPP:
    """Continuous kernel -> feature matrix -> KDE-weighted L-ensemble -> m-DPP.

    The realized subset size is the pipeline rank, which on clustered data can
    fall below the kernel rank m (wavelet cells holding no data contribute
    nothing). Callers that need the size exactly keep the default strict mode;
    the coreset experiment opts out and reports the realized size.
    """
    kernel = continuous_kernel(sampler, points.shape[1], m)
    psi = build_feature_matrix(kernel, points)
    rho_hat = KernelDensityEstimate(points, kernel=kde_kernel).at_data()
    dpp = build_discrete_dpp(psi, rho_hat)
    if dpp.rank < m and not allow_rank_deficit:
        raise RuntimeError(f"pipeline rank {dpp.rank} below requested size {m}")
    return dpp


@dataclass(frozen=True)
class QuadratureConfig:
    samplers: tuple[str, ...] = ("iid", "haar", "db2", "ope")
    d: int = 1
    fn: str = "gamma"
    fn_params: dict = field(default_factory=lambda: {"gamma": 0.75})
    weight: str = "one"  # "one" | "bump"
    n_list: tuple[int, ...] = (4, 16, 64)
    trials: int = 100
    seed: int = 0
    threads: int = 1


def _weight_fn(name: str, d: int):
    if name == "one":
        return None, None
    if name == "bump":
        w = make_test_function("bump", d=d)
        return w, w
    raise ValueError(f"unknown weight {name!r}")


def _quadrature_estimate(sampler: str, kernel, f, weight, n, d, rng) -> float:
    if sampler == "iid":
        pts = rng.uniform(size=(n, d))
        vals = f(pts)
        if weight is not None:
            vals = vals * weight(pts)
        return float(np.mean(vals))
    sample = sample_continuous(kernel, rng)
    wfun = weight if weight is not None else (lambda pts: np.ones(pts.shape[0]))
    if sampler == "db2":
        return quadrature_adjusted(sample.points, kernel, f, wfun)
    return quadrature_basic(sample.points, kernel, f, wfun)


def quadrature_estimates(sampler: str, d: int, n: int, f, weight,
                         trials: int, seed: int, threads: int = 1) -> np.ndarray:
    """All trial estimates for one (sampler, n) cell."""
    kernel = None if sampler == "iid" else continuous_kernel(sampler, d, n)

    def one(t: int) -> float:
        return _quadrature_estimate(sampler, kernel, f, weight, n, d,
                                    trial_rng(seed, sampler, n, t))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.array(list(pool.map(one, range(trials))))
    return np.array([one(t) for t in range(trials)])


def run_quadrature_experiment(cfg: QuadratureConfig) -> list[dict]:
    """Empirical estimator variance per (sampler, n) plus fitted log-log slope."""
    f = make_test_function(cfg.fn, d=cfg.d, **cfg.fn_params)
    weight, _ = _weight_fn(cfg.weight, cfg.d)
    rows = []
    for sampler in cfg.samplers:
        variances = []
        for n in cfg.n_list:
            est = quadrature_estimates(sampler, cfg.d, n, f, weight,
                                       cfg.trials, cfg.seed, cfg.threads)
            variances.append(float(np.var(est, ddof=1)))
        slope = float(np.polyfit(np.log(cfg.n_list), np.log(variances), 1)[0])
        for n, var in zip(cfg.n_list, variances):
            rows.append({"sampler": sampler, "fn": f.name, "d": cfg.d, "n": n,
                         "trials": cfg.trials, "variance": var, "slope": slope})
    return rows


@dataclass(frozen=True)
class CoresetConfig:
    samplers: tuple[str, ...] = ("iid", "haar", "db2", "ope")
    k: int = 3
    m_list: tuple[int, ...] = (64,)
    replicas: int = 150
    candidate_sets: int = 150
    seed: int = 0
    kde_kernel: str = "epanechnikov"


def kmeans_loss_table(points: np.ndarray, k: int, candidate_sets: int,
                      rng: np.random.Generator,
                      eval_points: np.ndarray | None = None
                      ) -> tuple[np.ndarray, np.ndarray]:
    """F[i, c] = k-means loss at evaluation point i under candidate center set c.

    Candidate sets are k dataset elements sampled uniformly without
    replacement, fixed once and shared by every sampler; returns the table
    and the (candidate_sets, k) center index array.
    """
    n = points.shape[0]
    centers = np.stack([rng.choice(n, size=k, replace=False)
                        for _ in range(candidate_sets)])
    where = points if eval_points is None else eval_points
    d2 = np.sum((where[:, None, :] - points[None, :, :]) ** 2, axis=2)
    table = np.stack([d2[:, c].min(axis=1) for c in centers], axis=1)
    return table, centers


def kmeans_losses_at(points: np.ndarray, centers: np.ndarray,
                     eval_points: np.ndarray) -> np.ndarray:
    """Loss table of precomputed candidate center sets at new evaluation points."""
    d2 = np.sum((eval_points[:, None, :] - points[None, :, :]) ** 2, axis=2)
    return np.stack([d2[:, c].min(axis=1) for c in centers], axis=1)


def coreset_sup_errors(dpp_or_none, points: np.ndarray, loss_table: np.ndarray,
                       m: int, replicas: int, seed: int, sampler: str,
                       control_table: np.ndarray | None = None) -> np.ndarray:
    """Per-replica sup over candidate sets of |L_C(f) - L(f)| / |L(f)|.

    With a control table (quasi-interpolant values per candidate, same shape
    as loss_table) the estimator is the control-variate form used for the
    non-constant-diagonal wavelet sampler.
    """
    totals = loss_table.sum(axis=0)
    n = points.shape[0]
    sups = np.empty(replicas)
    for r in range(replicas):
        rng = trial_rng(seed, sampler, m, r)
        if dpp_or_none is None:
            idx = rng.choice(n, size=m, replace=True)
            est = (n / m) * loss_table[idx].sum(axis=0)
        else:
            from .discretize import sample_discrete
            idx = sample_discrete(dpp_or_none, rng)
            weights = 1.0 / dpp_or_none.inclusion_probabilities()[idx]
            if control_table is None:
                est = weights @ loss_table[idx]
            else:
                est = (weights @ (loss_table[idx] - control_table[idx])
                       + control_table.sum(axis=0))
        sups[r] = np.max(np.abs(est - totals) / np.abs(totals))
    return sups


def run_coreset_experiment(dataset: Dataset, cfg: CoresetConfig) -> list[dict]:
    """0.9 quantile of the uniform relative error per (sampler, coreset size).

    DPP samplers request a rank-m kernel; the realized coreset size is the
    pipeline rank (the `size` column), which can be below m on clustered data.
    The db2 sampler estimates through the control-variate (adjusted) form, the
    others through the plain inverse-inclusion weights.
    """
    loss_table, centers = kmeans_loss_table(dataset.points, cfg.k, cfg.candidate_sets,
                                            trial_rng(cfg.seed, "candidate-centers"))
    rows = []
    for sampler in cfg.samplers:
        for m in cfg.m_list:
            dpp = None
            control = None
            if sampler != "iid":
                dpp = pipeline_dpp(sampler, dataset.points, m, cfg.kde_kernel,
                                   allow_rank_deficit=True)
                if sampler == "db2":
                    kernel = continuous_kernel(sampler, dataset.dim, m)
                    psi = build_feature_matrix(kernel, dataset.points)
                    dp = design_nodes(kernel)
                    dp_loss = kmeans_losses_at(dataset.points, centers, dp)
                    control = 2.0 ** (-kernel.dim * kernel.j / 2.0) * (psi @ dp_loss)
            size = m if dpp is None else dpp.rank
            sups = coreset_sup_errors(dpp, dataset.points, loss_table, size,
                                      cfg.replicas, cfg.seed, sampler,
                                      control_table=control)
            rows.append({"sampler": sampler, "k": cfg.k, "m": m, "size": size,
                         "replicas": cfg.replicas, "candidates": cfg.candidate_sets,
                         "q90": float(np.quantile(sups, 0.9))})
    return rows


@dataclass(frozen=True)
class PegasosConfig:
    samplers: tuple[str, ...] = ("iid", "haar")
    iterations: int = 200
    regularization: float = 0.1
    batch_per_class: int = 16
    trials: int = 10
    seed: int = 0
    train_fraction: float = 0.7
    reference_tol: float = 1e-8
    reference_max_iter: int = 100_000


def full_batch_subgradient(theta: np.ndarray, x: np.ndarray, y: np.ndarray,
                           lam: float) -> np.ndarray:
    margin = y * (x @ theta)
    active = margin < 1.0
    if not np.any(active):
        return lam * theta
    return lam * theta - (y[active, None] * x[active]).sum(axis=0) / x.shape[0]


def reference_solution(x: np.ndarray, y: np.ndarray, lam: float,
                       tol: float = 1e-8, max_iter: int = 100_000):
    """Deterministic full-batch subgradient descent with step 1/(lam t).

    Stops when the iterate moves less than tol; returns (theta, iterations,
    final step size of the iterate).
    """
    theta = np.zeros(x.shape[1])
    move = np.inf
    for t in range(1, max_iter + 1):
        step = full_batch_subgradient(theta, x, y, lam) / (lam * t)
        theta = theta - step
        move = float(np.linalg.norm(step))
        if move < tol:
            return theta, t, move
    return theta, max_iter, move


def stratified_split(labels: np.ndarray, train_fraction: float,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    train_idx, test_idx = [], []
    for cls in np.unique(labels):
        idx = np.nonzero(labels == cls)[0]
        idx = rng.permutation(idx)
        cut = int(round(train_fraction * idx.size))
        train_idx.append(idx[:cut])
        test_idx.append(idx[cut:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


class MinibatchSampler:
    """Per-class minibatch source: iid indices or one DPP pipeline per class."""

    def __init__(self, sampler: str, points: np.ndarray, labels_pm: np.ndarray,
                 batch_per_class: int, kde_kernel: str = "gaussian"):
        self.sampler = sampler
        self.m = batch_per_class
        self.class_indices = [np.nonzero(labels_pm == c)[0] for c in (-1.0, 1.0)]
        if any(idx.size < batch_per_class for idx in self.class_indices):
            raise ValueError("class too small for the per-class minibatch size")
        self.dpps = None
        if sampler != "iid":
            self.dpps = [pipeline_dpp(sampler, points[idx], batch_per_class, kde_kernel)
                         for idx in self.class_indices]

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        out = []
        for c, idx in enumerate(self.class_indices):
            if self.dpps is None:
                out.append(rng.choice(idx, size=self.m, replace=False))
            else:
                from .discretize import sample_discrete
                out.append(idx[sample_discrete(self.dpps[c], rng)])
        return np.concatenate(out)


def minibatch_subgradient(theta: np.ndarray, x: np.ndarray, y: np.ndarray,
                          batch: np.ndarray, lam: float) -> np.ndarray:
    xb, yb = x[batch], y[batch]
    active = yb * (xb @ theta) < 1.0
    hinge = np.zeros_like(theta)
    if np.any(active):
        hinge = (yb[active, None] * xb[active]).sum(axis=0) / batch.size
    return lam * theta - hinge


def run_pegasos_experiment(dataset: Dataset, cfg: PegasosConfig) -> tuple[list[dict], dict]:
    """Averaged Pegasos learning curves per sampler; also returns the
    reference-solver report used to document the theta* tolerance.

    The descent runs on train-mean-centered features (the bias-free hinge
    classifier sign(<theta, x>) is degenerate on the all-positive unit-cube
    coordinates); minibatch sampling keeps the unit coordinates.
    """
    if dataset.labels is None:
        raise ValueError("pegasos needs a labeled two-class dataset")
    classes = np.unique(dataset.labels)
    if classes.size != 2:
        raise ValueError("pegasos needs exactly two classes")
    y = np.where(dataset.labels == classes[0], -1.0, 1.0)
    x = dataset.points
    tr, te = stratified_split(y, cfg.train_fraction, trial_rng(cfg.seed, "split"))
    center = x[tr].mean(axis=0)
    x = x - center
    xtr, ytr, xte, yte = x[tr], y[tr], x[te], y[te]
    lam = cfg.regularization
    theta_star, ref_iters, ref_move = reference_solution(
        xtr, ytr, lam, cfg.reference_tol, cfg.reference_max_iter)
    report = {"iterations": ref_iters, "final_move": ref_move,
              "grad_norm": float(np.linalg.norm(
                  full_batch_subgradient(theta_star, xtr, ytr, lam)))}
    rows = []
    for sampler in cfg.samplers:
        curves = np.zeros((cfg.trials, cfg.iterations, 3))
        source = MinibatchSampler(sampler, dataset.points[tr], ytr, cfg.batch_per_class)
        for trial in range(cfg.trials):
            rng = trial_rng(cfg.seed, sampler, trial)
            theta = np.zeros(x.shape[1])
            for t in range(1, cfg.iterations + 1):
                batch = source.draw(rng)
                grad = minibatch_subgradient(theta, xtr, ytr, batch, lam)
                theta = theta - grad / (lam * t)
                pred = np.sign(xte @ theta)
                pred[pred == 0.0] = 1.0
                curves[trial, t - 1, 0] = np.mean(pred != yte)
                curves[trial, t - 1, 1] = np.linalg.norm(
                    full_batch_subgradient(theta, xtr, ytr, lam))
                curves[trial, t - 1, 2] = np.linalg.norm(theta - theta_star)
        mean = curves.mean(axis=0)
        stderr = curves.std(axis=0, ddof=1) / np.sqrt(cfg.trials) if cfg.trials > 1 \
            else np.zeros_like(mean)
        for t in range(cfg.iterations):
            for mi, metric in enumerate(("test_error", "grad_norm", "theta_error")):
                rows.append({"sampler": sampler, "t": t + 1, "metric": metric,
                             "value": float(mean[t, mi]), "stderr": float(stderr[t, mi])})
    return rows, report
