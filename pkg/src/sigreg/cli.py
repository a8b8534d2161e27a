"""``sigreg`` command-line interface.

Subcommands::

    simulate       generate a synthetic dataset (paths CSV, targets CSV, manifest JSON)
    signature      compute truncated signatures of every path in a CSV
    fit            select the truncation order and fit the signature model
    experiment     run a repeated, seeded experiment from a JSON config
    ingest-check   validate a paths/targets CSV pair and print a summary

Exit codes: 0 success, 2 configuration error, 3 data error, 4 capacity error.
Every output file is written atomically, so a failed command leaves no
partial files behind.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (
    ingest_csv,
    write_json,
    write_paths_csv,
    write_signature_csv,
    write_targets_csv,
)
from .datagen import SimSpec, generate
from .errors import CapacityError, ConditioningError, ConfigError, DataError, SigRegError
from .experiments import ExperimentConfig, run_experiment, write_tidy_csv
from .order_selection import (
    PenaltyConfig,
    default_m_max,
    dimension_jump,
    fit_signature_model,
)
from .paths import time_augment
from .ridge import cv_select_lambda, default_lambda_grid
from .signature import SigShape, batch_signatures, sig_dim, word_labels

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CAPACITY = 0, 2, 3, 4

logger = logging.getLogger("sigreg")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _seed(args, default: int = 0) -> int:
    seed = getattr(args, "seed", None)
    return default if seed is None else seed


def _threads(args) -> int:
    return getattr(args, "threads", None) or 1


# --------------------------------------------------------------------- commands
def cmd_simulate(args) -> int:
    model = "gaussian_process" if args.model == "gp" else args.model
    response = args.response or ("trend_norm" if model == "gaussian_process" else "signature")
    spec = SimSpec(
        n=args.n, d=args.d, p=args.p, seed=_seed(args), model=model,
        response=response, m_star=args.m_star, noise=args.noise,
    )
    paths, targets = generate(spec)
    out = Path(args.out_dir)
    write_paths_csv(out / "paths.csv", paths)
    write_targets_csv(out / "targets.csv", targets)
    write_json(out / "manifest.json", {"tool": "sigreg", "version": __version__, "spec": spec.to_dict()})
    return EXIT_OK


def cmd_signature(args) -> int:
    ids, paths, _ = ingest_csv(args.input)
    if args.augment:
        paths = [time_augment(p) for p in paths]
    F = batch_signatures(paths, args.m, n_jobs=_threads(args))
    write_signature_csv(args.output, F, SigShape(paths[0].d, args.m), sample_ids=ids)
    return EXIT_OK


def cmd_fit(args) -> int:
    started = time.perf_counter()
    ids, paths, y = ingest_csv(args.paths, args.targets)
    d = paths[0].d
    m_max = args.m_max if args.m_max is not None else default_m_max(d)
    grid = default_lambda_grid()
    seed = _seed(args)
    k_pen, kpen_path = args.k_pen, None
    if args.kpen_auto:
        aug = [time_augment(p) for p in paths]
        F = batch_signatures(aug, m_max, n_jobs=_threads(args))
        lam = cv_select_lambda(F[:, : sig_dim(d + 1, 1)], y, grid, k=args.k_folds, seed=seed,
                               standardize=args.standardize)
        k_pen, m_hats = dimension_jump(aug, y, m_max, lam, rho=args.rho, features=F,
                                       return_path=True, standardize=args.standardize)
        kpen_path = m_hats.tolist()
    cfg = PenaltyConfig(k_pen=k_pen, rho=args.rho, m_max=m_max)
    result, model = fit_signature_model(
        paths, y, cfg, lambda_grid=grid, k_folds=args.k_folds, seed=seed, standardize=args.standardize
    )
    train_mse = float(np.mean((y - model.predict(paths)) ** 2))
    shape = SigShape(d + 1, model.m)
    report = {
        "tool": "sigreg",
        "version": __version__,
        "created": _now(),
        "seed": seed,
        "input": {"paths": str(args.paths), "targets": str(args.targets), "n": len(paths), "d": d},
        "config": {"k_pen": k_pen, "rho": args.rho, "m_max": m_max, "kpen_auto": args.kpen_auto,
                   "k_folds": args.k_folds, "standardize": args.standardize},
        **result.to_dict(),
        "kpen_m_hat_path": kpen_path,
        "train_mse": train_mse,
        "coefficients": dict(zip(("S" + w for w in word_labels(shape)), model.ridge.coeffs.tolist())),
        "elapsed_s": time.perf_counter() - started,
    }
    if args.predictions:
        write_targets_csv(args.predictions, model.predict(paths), sample_ids=ids)
    write_json(args.output, report)
    print(f"m_hat={result.m_hat} lambda={result.lam:.6g} k_pen={k_pen:.6g} train_mse={train_mse:.6g}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{args.config}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{args.config}: expected a JSON object")
    if args.kind:
        data["kind"] = args.kind
    if args.repetitions is not None:
        data["repetitions"] = args.repetitions
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if "kind" not in data:
        raise ConfigError("experiment kind is not set (use --kind or a config file)")
    for key in ("paths_file", "targets_file"):
        if data.get(key) and not os.path.exists(data[key]):
            raise DataError(f"{key} {data[key]!r} does not exist")
    cfg = ExperimentConfig.from_dict(data)
    report = run_experiment(cfg, threads=_threads(args))
    # write both or neither
    try:
        write_json(args.output, report)
        if args.tidy:
            write_tidy_csv(args.tidy, report["records"])
    except BaseException:
        for target in (args.output, args.tidy):
            if target and os.path.exists(target):
                os.unlink(target)
        raise
    for d, agg in report["aggregates"].items():
        print(f"d={d} m_hat histogram={agg['m_hat_histogram']}")
    return EXIT_OK


def cmd_ingest_check(args) -> int:
    ids, paths, y = ingest_csv(args.paths, args.targets)
    lengths = [p.p for p in paths]
    summary = {
        "samples": len(paths),
        "d": paths[0].d,
        "min_points": int(min(lengths)),
        "max_points": int(max(lengths)),
        "targets": None if y is None else int(y.size),
    }
    print(json.dumps(summary))
    return EXIT_OK


# ----------------------------------------------------------------------- parser
def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="unsigned 64-bit seed")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads")
    common.add_argument("--budget", type=int, default=argparse.SUPPRESS,
                        help="maximum signature coefficients per path (overrides SIGREG_BUDGET)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="sigreg", description=__doc__.split("\n")[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"sigreg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic dataset")
    p.add_argument("--model", choices=("polysinus", "gp"), default="polysinus")
    p.add_argument("--response", choices=("signature", "mean_next_step", "trend_norm"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--m-star", type=int, default=5)
    p.add_argument("--noise", type=float, default=100.0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("signature", parents=[common], help="signatures of every path in a CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--augment", action="store_true", help="append time as a coordinate first")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_signature)

    p = sub.add_parser("fit", parents=[common], help="select m and fit the signature model")
    p.add_argument("--paths", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--k-pen", type=float, default=20.0)
    p.add_argument("--rho", type=float, default=0.4)
    p.add_argument("--m-max", type=int)
    p.add_argument("--kpen-auto", action="store_true", help="calibrate k_pen by dimension jump")
    p.add_argument("--k-folds", type=int, default=5)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--output", required=True, help="report JSON")
    p.add_argument("--predictions", help="optional CSV of in-sample predictions")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("experiment", parents=[common], help="run a repeated experiment")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--kind", choices=("toy_convergence", "dimension_study_polysinus",
                                      "dimension_study_gp", "csv_regression"))
    p.add_argument("--repetitions", type=int)
    p.add_argument("--output", required=True, help="report JSON")
    p.add_argument("--tidy", help="tidy CSV (repetition, method, d, metric, value)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("ingest-check", parents=[common], help="validate a paths/targets CSV pair")
    p.add_argument("--paths", required=True)
    p.add_argument("--targets")
    p.set_defaults(func=cmd_ingest_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    seed = getattr(args, "seed", None)
    if seed is not None and not 0 <= seed < 2**64:
        print("sigreg: error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    budget = getattr(args, "budget", None)
    if budget is not None and budget < 1:
        print("sigreg: error: --budget must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    saved_budget = os.environ.get("SIGREG_BUDGET")
    if budget is not None:
        # the flag takes precedence over the environment for this invocation only
        os.environ["SIGREG_BUDGET"] = str(budget)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"sigreg: capacity error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except ConfigError as exc:
        print(f"sigreg: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ConditioningError) as exc:
        print(f"sigreg: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"sigreg: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SigRegError as exc:
        print(f"sigreg: error: {exc}", file=sys.stderr)
        return 1
    finally:
        if budget is not None:
            if saved_budget is None:
                os.environ.pop("SIGREG_BUDGET", None)
            else:
                os.environ["SIGREG_BUDGET"] = saved_budget

if __name__ == "__main__":
    sys.exit(main())
