"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 numerical
failure.  Results go to files, progress to stderr, and ``--json`` prints a
summary (including the fully resolved configuration) to stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datamodel import (
    DataError,
    NumericalError,
    load_dataset,
    load_model,
    load_truth,
    output_path,
    read_matrix,
    save_dataset,
    save_model,
    save_truth,
    write_matrix,
)
from .estimator import FitConfig, extract_shared, fit, transform
from .glasso import (
    DEFAULT_GAMMA,
    DEFAULT_GRID_SIZE,
    coregulation_pipeline,
    glasso_path,
    graphical_lasso,
    ebic,
    lambda_grid,
    write_edges,
)
from .metrics import amari_distance, mcc
from .optimizer import OptimizerConfig
from .model_selection import TIE_REL_TOL, SelectionReport, select_shared_count
from .simulate import SOURCE_LAWS, SimulationConfig, simulate

log = logging.getLogger("shindica")

NRE_CURVE_COLUMNS = ["k", "nre_mean", "nre_ci_low", "nre_ci_high"]
AMARI_CURVE_COLUMNS = ["shared_count", "amari_mean", "seed"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_k_grid(text: str) -> list:
    """``"a:b"`` (inclusive range) or a comma-separated list."""
    text = text.strip()
    try:
        if ":" in text:
            a, b = text.split(":")
            a, b = int(a), int(b)
            if b < a:
                raise UsageError(f"empty k grid {text!r}")
            return list(range(a, b + 1))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"invalid k grid {text!r}") from None


def _floats(text: str):
    vals = [float(v) for v in text.split(",")]
    return vals[0] if len(vals) == 1 else vals


def _retain(text):
    if text is None:
        return None
    return float(text) if "." in text else int(text)


def emit_curve(results, path) -> None:
    """Write tidy plot data.

    A ``SelectionReport`` (or its dict) becomes ``k, nre_mean, nre_ci_low,
    nre_ci_high`` with a normal 95% interval over repetitions.  A list of
    ``{"shared_count", "amari_mean", "seed"}`` rows is written as is.  Empty
    results give a header-only file.
    """
    path = Path(path)
    if isinstance(results, SelectionReport):
        results = results.to_dict()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if isinstance(results, dict):
            w.writerow(NRE_CURVE_COLUMNS)
            scores = np.asarray(results.get("nre_per_k") or [], dtype=np.float64)
            if scores.size == 0:
                return
            mean = scores.mean(axis=0)
            half = (
                1.96 * scores.std(axis=0, ddof=1) / np.sqrt(scores.shape[0])
                if scores.shape[0] > 1
                else np.zeros_like(mean)
            )
            for k, m, h in zip(results["k_grid"], mean, half):
                w.writerow([k, repr(float(m)), repr(float(m - h)), repr(float(m + h))])
        else:
            w.writerow(AMARI_CURVE_COLUMNS)
            for row in results or []:
                w.writerow([row[c] for c in AMARI_CURVE_COLUMNS])


def _fit_config(args) -> FitConfig:
    return FitConfig(
        lam=args.lam,
        nonlinearity=args.nonlinearity,
        retain=_retain(args.retain),
        optimizer=OptimizerConfig(max_iterations=args.max_iter, gradient_tolerance=args.tol),
    )


def _add_fit_flags(p):
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--nonlinearity", choices=["logcosh", "gauss"], default="logcosh")
    p.add_argument("--retain", default=None, help="number of components or a variance fraction")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-7)


def cmd_simulate(args):
    cfg = SimulationConfig(
        n_views=args.views,
        sources_per_view=args.sources,
        shared_count=args.shared,
        samples=args.samples,
        noise_sigma=args.noise_sigma,
        source_law=args.source_law,
        mixing_mean=args.mixing_mean,
        mixing_std=args.mixing_std,
        seed=args.seed,
    )
    data, truth = simulate(cfg)
    out = output_path(args.out)
    manifest = save_dataset(data, out)
    save_truth(truth, out / "truth.json")
    log.info("wrote %d views to %s", data.n_views, out)
    return {"manifest": str(manifest), "truth": str(out / "truth.json")}


def cmd_fit(args):
    data = load_dataset(args.manifest)
    cfg = _fit_config(args)
    model = fit(data, args.shared_k, cfg)
    out = output_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, out)
    log.info("fit finished: %s after %d iterations", model.diagnostics["stop_reason"], model.diagnostics["iterations"])
    return {
        "model": str(out),
        "converged": model.converged,
        "iterations": model.diagnostics["iterations"],
        "final_objective": model.objective_trace[-1],
    }


def cmd_transform(args):
    model = load_model(args.model)
    data = load_dataset(args.manifest)
    est = transform(model, data)
    out = output_path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for d, z in enumerate(est.z):
        write_matrix(out / f"sources{d}.csv", z)
        files.append(str(out / f"sources{d}.csv"))
    if model.shared_count:
        write_matrix(out / "shared.csv", est.shared_mean)
        files.append(str(out / "shared.csv"))
    return {"files": files}


def cmd_select_k(args):
    data = load_dataset(args.manifest)
    grid = parse_k_grid(args.k_grid)
    report = select_shared_count(
        data, grid, _fit_config(args), split_fraction=args.train_frac,
        repetitions=args.reps, seed=args.seed, rel_tol=args.rel_tol,
    )
    out = output_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report.to_dict(), indent=2))
    if args.curve:
        emit_curve(report, output_path(args.curve))
    log.info("selected k* = %d", report.k_star)
    return {"report": str(out), "k_star": report.k_star, "nre_mean": report.to_dict()["nre_mean"]}


def cmd_eval(args):
    model = load_model(args.model)
    truth = load_truth(args.truth)
    if args.metric == "amari":
        if len(truth.mixing) != model.n_views:
            raise DataError("model and ground truth differ in the number of views")
        dists = [
            {
                "raw": amari_distance(A_hat, A),
                "normalized": amari_distance(A_hat, A, normalize=True),
            }
            for A_hat, A in zip(model.mixing_estimates, truth.mixing)
        ]
        for d, v in enumerate(dists):
            print(f"view {d}: amari {v['raw']:.6g} (normalized {v['normalized']:.6g})", file=sys.stderr)
        return {"metric": "amari", "per_view": dists}
    if args.manifest is None:
        raise UsageError("eval mcc needs --manifest to extract the shared sources")
    data = load_dataset(args.manifest)
    if model.shared_count != truth.shared_count:
        raise DataError("model and truth disagree on the shared count")
    score, pairs = mcc(extract_shared(model, data), truth.shared_sources)
    print(f"mcc {score:.6f}", file=sys.stderr)
    return {"metric": "mcc", "mcc": score, "matching": pairs}


def cmd_glasso(args):
    sigma = read_matrix(args.sigma)
    out = output_path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.lam is not None:
        est = graphical_lasso(sigma, args.lam)
        est.ebic = ebic(est.theta, sigma, args.n_samples, args.gamma, not args.unscaled_ebic)
        path = [est]
    else:
        path = glasso_path(
            sigma, lambda_grid(sigma, args.grid_size), args.n_samples, args.gamma, scale_fit=not args.unscaled_ebic
        )
    best = min(path, key=lambda e: (e.ebic, -e.lam))
    write_edges(best.edges, out / "edges.csv")
    write_matrix(out / "theta.csv", best.theta)
    return {
        "lambda": best.lam,
        "ebic": best.ebic,
        "n_edges": best.n_edges,
        "path": [{"lambda": e.lam, "ebic": e.ebic, "n_edges": e.n_edges, "kkt": e.kkt_residual} for e in path],
    }


def cmd_pipeline(args):
    data = load_dataset(args.manifest)
    if data.n_views != 2:
        raise DataError("the co-regulation pipeline needs exactly two views")
    res = coregulation_pipeline(
        data.views[0], data.views[1], args.shared_k, _fit_config(args),
        lambda_grid_size=args.grid_size, gamma=args.gamma, top_models=args.top,
        scale_fit=not args.unscaled_ebic,
    )
    out = output_path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for rank, est in enumerate(res.models, 1):
        f = out / f"edges_model{rank}.csv"
        write_edges(est.edges, f)
        files.append(str(f))
    return {
        "files": files,
        "models": [{"lambda": e.lam, "ebic": e.ebic, "n_edges": e.n_edges} for e in res.models],
        "n_samples": res.n_samples,
    }


def cmd_sweep(args):
    rows = []
    for c in parse_k_grid(args.shared_grid):
        for seed in range(args.seed, args.seed + args.seeds):
            data, truth = simulate(
                SimulationConfig(
                    n_views=args.views, sources_per_view=args.sources, shared_count=c,
                    samples=args.samples, noise_sigma=args.noise_sigma, seed=seed,
                )
            )
            model = fit(data, c, _fit_config(args))
            dists = [amari_distance(Ah, A, normalize=True) for Ah, A in zip(model.mixing_estimates, truth.mixing)]
            rows.append({"shared_count": c, "amari_mean": float(np.mean(dists)), "seed": seed})
            log.info("shared=%d seed=%d amari=%.4f", c, seed, rows[-1]["amari_mean"])
    out = output_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_curve(rows, out)
    return {"curve": str(out), "rows": rows}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shindica", description="Multi-view ICA with shared and individual sources.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--json", action="store_true", help="print a JSON summary to stdout")
    parser.add_argument("--threads", type=int, default=None, help="bound on internal parallelism")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="draw a synthetic dataset")
    p.add_argument("--views", type=int, required=True)
    p.add_argument("--sources", type=int, required=True)
    p.add_argument("--shared", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--noise-sigma", type=_floats, default=0.0)
    p.add_argument("--source-law", choices=SOURCE_LAWS, default="laplace")
    p.add_argument("--mixing-mean", type=float, default=1.0)
    p.add_argument("--mixing-std", type=float, default=0.1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--shared-k", type=int, required=True)
    _add_fit_flags(p)
    p.add_argument("--seed", type=int, default=0, help="recorded only; fitting draws no random numbers")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("transform", help="apply a fitted model to data")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("select-k", help="choose the number of shared sources by held-out NRE")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k-grid", required=True)
    p.add_argument("--train-frac", type=float, default=0.75)
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--rel-tol", type=float, default=TIE_REL_TOL)
    _add_fit_flags(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--curve", default=None, help="also write the NRE curve as CSV")
    p.set_defaults(func=cmd_select_k)

    p = sub.add_parser("eval", help="compare a model against a ground-truth bundle")
    p.add_argument("metric", choices=["amari", "mcc"])
    p.add_argument("--model", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("glasso", help="graphical lasso with EBIC selection")
    p.add_argument("--sigma", required=True, help="correlation matrix CSV")
    p.add_argument("--n-samples", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    p.add_argument("--unscaled-ebic", action="store_true", help="drop the factor n on the EBIC fit term")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_glasso)

    p = sub.add_parser("pipeline", help="downstream pipelines")
    pipe = p.add_subparsers(dest="pipeline", parser_class=_Parser)
    q = pipe.add_parser("coregulation", help="ICA sources -> correlation -> glasso -> EBIC")
    q.add_argument("--manifest", required=True)
    q.add_argument("--shared-k", type=int, required=True)
    _add_fit_flags(q)
    q.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    q.add_argument("--gamma", type=float, default=DEFAULT_GAMMA)
    q.add_argument("--unscaled-ebic", action="store_true", help="drop the factor n on the EBIC fit term")
    q.add_argument("--top", type=int, default=10)
    q.add_argument("--seed", type=int, default=0, help="recorded only; the pipeline draws no random numbers")
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("sweep", help="Amari distance over shared counts on simulated data")
    p.add_argument("--views", type=int, default=2)
    p.add_argument("--sources", type=int, required=True)
    p.add_argument("--shared-grid", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--noise-sigma", type=_floats, default=0.0)
    p.add_argument("--seeds", type=int, default=5)
    _add_fit_flags(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def _resolved(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            raise UsageError("missing subcommand")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads is not None:
        _set_threads(args.threads)
    try:
        summary = args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if args.json:
        print(json.dumps({"command": args.command, "config": _resolved(args), "result": summary}, default=_jsonable))
    return 0


def _set_threads(n: int) -> None:
    try:
        import numba

        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    except Exception:  # noqa: BLE001 - thread bound is advisory
        pass


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    return str(obj)


def main() -> None:
    sys.exit(run())
