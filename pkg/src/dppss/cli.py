"""Command line harness: quadrature, coreset-kmeans, pegasos, validate."""

from __future__ import annotations

import argparse
import sys

from . import datasets, experiments, validation


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace(",", " ").split())


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--out", default=None, help="output CSV path")
    parser.add_argument("--threads", type=int, default=1,
                        help="concurrent trial workers")


def _load_dataset(args) -> datasets.Dataset:
    if args.dataset == "gmm":
        return datasets.gen_gmm_trimodal(args.gmm_size, seed=args.seed)
    if args.dataset == "gauss2":
        return datasets.gen_two_class_gaussians(args.gmm_size, seed=args.seed)
    if args.dataset == "mnist":
        if not (args.mnist_images and args.mnist_labels):
            raise SystemExit("--mnist-images and --mnist-labels are required")
        raw, labels = datasets.load_mnist_idx(
            datasets.resolve_data_path(args.mnist_images),
            datasets.resolve_data_path(args.mnist_labels),
            digits=tuple(args.digits), limit=args.limit)
        return datasets.pca_project(raw, args.dim, labels=labels, provenance="mnist-idx")
    if args.dataset == "csv":
        if not args.csv_path:
            raise SystemExit("--csv-path is required with --dataset csv")
        return datasets.load_points_csv(datasets.resolve_data_path(args.csv_path))
    raise SystemExit(f"unknown dataset {args.dataset}")


def _dataset_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", choices=("gmm", "gauss2", "mnist", "csv"),
                        default="gmm")
    parser.add_argument("--gmm-size", type=int, default=1024)
    parser.add_argument("--mnist-images", default=None)
    parser.add_argument("--mnist-labels", default=None)
    parser.add_argument("--csv-path", default=None)
    parser.add_argument("--digits", type=int, nargs="+", default=[4, 9])
    parser.add_argument("--limit", type=int, default=1000)
    parser.add_argument("--dim", type=int, default=2, help="PCA target dimension")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dppss",
        description="Wavelet and orthogonal-polynomial DPP subsampling experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quadrature", help="variance decay of DPP quadratures")
    q.add_argument("--sampler", nargs="+", default=["iid", "haar", "db2", "ope"],
                   help="subset of iid haar db2 ope")
    q.add_argument("--dim", type=int, default=1, choices=(1, 2))
    q.add_argument("--fn", default="gamma(0.75)",
                   help="gamma(g), holder(s), mixcos, or bump")
    q.add_argument("--weight", default="one", choices=("one", "bump"))
    q.add_argument("--n-list", type=_int_list, default=(4, 8, 16, 32, 64))
    q.add_argument("--trials", type=int, default=100)
    _add_common(q)

    c = sub.add_parser("coreset-kmeans", help="k-means coreset quality quantiles")
    c.add_argument("--sampler", nargs="+", default=["iid", "haar", "db2", "ope"])
    c.add_argument("--k", type=int, default=3)
    c.add_argument("--m-list", type=_int_list, default=(64,))
    c.add_argument("--replicas", type=int, default=150)
    c.add_argument("--candidates", type=int, default=150)
    _dataset_flags(c)
    _add_common(c)

    p = sub.add_parser("pegasos", help="minibatch subgradient descent on the hinge loss")
    p.add_argument("--sampler", nargs="+", default=["iid", "haar", "db2", "ope"])
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--batch-per-class", type=int, default=16)
    p.add_argument("--regularization", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=100)
    _dataset_flags(p)
    p.set_defaults(dataset="gauss2")
    _add_common(p)

    v = sub.add_parser("validate", help="run the validation suites")
    v.add_argument("--suite", default="all",
                   help="all, or one of: " + ", ".join(validation.SUITES))
    v.add_argument("--tamper", action="store_true",
                   help="negative control: inject a sampler bias, expect failures")
    _add_common(v)

    args = parser.parse_args(argv)

    if args.command == "quadrature":
        name, params = _parse_fn(args.fn)
        cfg = experiments.QuadratureConfig(
            samplers=tuple(args.sampler), d=args.dim, fn=name, fn_params=params,
            weight=args.weight, n_list=tuple(args.n_list), trials=args.trials,
            seed=args.seed, threads=args.threads)
        rows = experiments.run_quadrature_experiment(cfg)
        _emit(rows, experiments.QUADRATURE_COLUMNS, args.out)
        return 0

    if args.command == "coreset-kmeans":
        dataset = _load_dataset(args)
        cfg = experiments.CoresetConfig(
            samplers=tuple(args.sampler), k=args.k, m_list=tuple(args.m_list),
            replicas=args.replicas, candidate_sets=args.candidates, seed=args.seed)
        rows = experiments.run_coreset_experiment(dataset, cfg)
        _emit(rows, experiments.CORESET_COLUMNS, args.out)
        return 0

    if args.command == "pegasos":
        dataset = _load_dataset(args)
        cfg = experiments.PegasosConfig(
            samplers=tuple(args.sampler), iterations=args.iterations,
            regularization=args.regularization, batch_per_class=args.batch_per_class,
            trials=args.trials, seed=args.seed)
        rows, report = experiments.run_pegasos_experiment(dataset, cfg)
        print(f"# reference solver: iterations={report['iterations']} "
              f"final_move={report['final_move']:.2e} grad_norm={report['grad_norm']:.2e}")
        _emit(rows, experiments.PEGASOS_COLUMNS, args.out)
        return 0

    if args.command == "validate":
        code, results = validation.run_validation(args.suite, seed=args.seed,
                                                  tamper=args.tamper)
        for r in results:
            print(r.line())
        print(f"# {'all passed' if code == 0 else 'FAILURES present'}")
        return code

    return 2


def _parse_fn(spec: str) -> tuple[str, dict]:
    spec = spec.strip()
    if "(" not in spec:
        return spec, {}
    name, arg = spec.rstrip(")").split("(", 1)
    value = float(arg)
    key = {"gamma": "gamma", "holder": "s"}.get(name)
    if key is None:
        raise SystemExit(f"function {name!r} takes no parameter")
    return name, {key: value}


def _emit(rows, columns, out_path) -> None:
    if out_path:
        experiments.write_csv(out_path, columns, rows)
        print(f"# wrote {len(rows)} rows to {out_path}")
    else:
        print(",".join(columns))
        for row in sorted(tuple(experiments._fmt(r[c]) for c in columns) for r in rows):
            print(",".join(row))


if __name__ == "__main__":
    sys.exit(main())
