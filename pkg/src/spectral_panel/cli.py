"""Command-line interface: ``estimate``, ``classify`` and ``simulate``.

Exit status is 0 on success, 2 for invalid input or arguments and 3 when a
numerical step fails. Errors are reported as a single line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .classify import classify
from .dynamic import augment_panel, dynamic_post_spectral, dynamic_spectral
from .errors import PanelNumericError, PanelValueError
from .panel import BalancedPanel, GroupAssignment, PanelSchema, RngSpec, load_panel_csv
from .penalized import lambda_rule, penalized_spectral
from .postspectral import oracle_ols, pooled_ols
from .simulate import (
    ESTIMATORS,
    emit_replications,
    emit_table,
    paper_table_grid,
    parse_config,
    run_replications,
    summarize,
)
from .spectral import SpectralConfig, spectral_estimate, spectral_estimate_ife

log = logging.getLogger("spectral_panel")

METHODS = ("spectral", "post-spectral", "oracle", "lasso")


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    seed = int(np.random.SeedSequence().entropy % (2**63))
    print(f"seed: {seed}", file=sys.stderr)
    log.info("no --seed given; using %d", seed)
    return seed


def _positive(name: str, value: int | None) -> None:
    if value is not None and value < 1:
        raise PanelValueError(f"--{name} must be a positive integer, got {value}")


def _add_panel_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", type=Path, help="long-format panel CSV")
    p.add_argument("--unit-col", default="unit")
    p.add_argument("--time-col", default="time")
    p.add_argument("--y-col", default="y")
    p.add_argument("--x-cols", default=None, help="comma-separated covariate columns (default: all others)")
    p.add_argument("--G", type=int, required=True, help="number of groups")
    p.add_argument("--M", type=int, default=1, help="number of covariate factors")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--backend", choices=("auto", "dense", "randomized"), default="auto")
    p.add_argument("--output", type=Path, default=None, help="write the report here instead of stdout")


def _schema(args) -> PanelSchema:
    x = tuple(c.strip() for c in args.x_cols.split(",")) if args.x_cols else None
    return PanelSchema(args.unit_col, args.time_col, args.y_col, x)


def _covariate_names(path: Path, schema: PanelSchema) -> list[str]:
    if schema.x is not None:
        return list(schema.x)
    with open(path, newline="", encoding="utf-8") as fh:
        header = [h.strip() for h in next(csv.reader(fh))]
    return [h for h in header if h not in (schema.unit, schema.time, schema.y)]


def _read_groups(path: Path, panel: BalancedPanel) -> GroupAssignment:
    """Groups file with columns ``unit_id`` and ``group``; every panel unit must appear."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"unit_id", "group"} <= set(reader.fieldnames):
            raise PanelValueError("groups file needs columns unit_id and group")
        table = {row["unit_id"]: row["group"] for row in reader}
    missing = [u for u in panel.unit_ids if str(u) not in table]
    if missing:
        raise PanelValueError(f"groups file lacks units {missing[:5]}")
    labels = [table[str(u)] for u in panel.unit_ids]
    return GroupAssignment.from_labels(labels)


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _coef_table(names, est, se, fmt: str) -> str:
    rows = []
    for k, name in enumerate(names):
        s = None if se is None else float(se[k])
        t = None if s is None or s == 0 else float(est[k]) / s
        rows.append((name, float(est[k]), s, t))
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["term", "estimate", "std_error", "t_stat"])
        for name, b, s, t in rows:
            w.writerow([name, repr(b), "" if s is None else repr(s), "" if t is None else repr(t)])
        return buf.getvalue()
    lines = ["| term | estimate | std_error | t_stat |", "|---|---|---|---|"]
    for name, b, s, t in rows:
        lines.append(f"| {name} | {b:.6f} | {'' if s is None else f'{s:.6f}'} | {'' if t is None else f'{t:.3f}'} |")
    return "\n".join(lines) + "\n"


def _validate_estimate(args) -> None:
    _positive("G", args.G)
    _positive("M", args.M)
    if args.ife:
        _positive("J", args.J)
        if args.J is None:
            raise PanelValueError("--ife needs --J")
        if args.method != "spectral":
            raise PanelValueError("--ife is available with --method spectral only")
        if args.dynamic:
            raise PanelValueError("--ife and --dynamic cannot be combined")
    if args.method == "lasso" and args.dynamic:
        raise PanelValueError("--method lasso does not support --dynamic")
    if args.method != "lasso" and (args.lam is not None or args.lambda_rule_C is not None):
        raise PanelValueError("--lambda / --lambda-rule-C only apply to --method lasso")
    if args.method == "oracle" and args.groups is None:
        raise PanelValueError("--method oracle needs --groups")
    if args.lam is not None and args.lam < 0:
        raise PanelValueError("--lambda must be nonnegative")


def cmd_estimate(args) -> int:
    _validate_estimate(args)
    seed = _resolve_seed(args.seed)
    rng = RngSpec(seed)
    schema = _schema(args)
    panel = load_panel_csv(args.input, schema)
    names = _covariate_names(args.input, schema)
    if args.dynamic:
        names = ["y_lag", *names]
    started = time.perf_counter()
    se = None
    extra: list[str] = []
    if args.method == "spectral":
        if args.ife:
            est = spectral_estimate_ife(panel, args.J, args.backend, rng=rng).beta_tilde
        elif args.dynamic:
            fit = dynamic_spectral(panel, args.G, args.M, args.backend, rng=rng)
            est = np.concatenate([[fit.theta_hat], fit.beta_hat])
        else:
            est = spectral_estimate(panel, args.G, args.M, args.backend, rng=rng).beta_tilde
    elif args.method == "post-spectral":
        spec = SpectralConfig.for_groups(args.G, args.M * (2 if args.dynamic else 1), backend=args.backend)
        if args.dynamic:
            dfit = dynamic_post_spectral(panel, args.G, args.M, rng, spec)
            cls, fit = dfit.classification, dfit.inner
        else:
            cls = classify(panel, args.G, args.M, rng, spec)
            fit = pooled_ols(panel, cls.g_hat)
        est, se = fit.beta_hat, fit.std_errors
        extra += [f"lambda_hat: {cls.lambda_hat!r}", f"groups_found: {cls.n_found}"]
    elif args.method == "oracle":
        groups = _read_groups(args.groups, panel)
        fit = oracle_ols(augment_panel(panel) if args.dynamic else panel, groups)
        est, se = fit.beta_hat, fit.std_errors
    else:
        lam = args.lam
        if lam is None:
            c = 1.0 if args.lambda_rule_C is None else args.lambda_rule_C
            lam = lambda_rule(panel.n_units, panel.n_periods, panel.n_covariates, c)
        sol = penalized_spectral(panel, args.G, args.M, lam, args.backend, rng=rng)
        est = sol.beta_lambda
        extra += [f"lambda: {lam!r}", f"kkt_residual: {sol.kkt_residual:.3e}"]
    elapsed = time.perf_counter() - started
    _emit(_coef_table(names, est, se, args.format), args.output)
    for line in extra + [f"seconds: {elapsed:.3f}"]:
        print(line, file=sys.stderr)
    return 0


def cmd_classify(args) -> int:
    _positive("G", args.G)
    _positive("M", args.M)
    seed = _resolve_seed(args.seed)
    panel = load_panel_csv(args.input, _schema(args))
    spec = SpectralConfig.for_groups(args.G, args.M, backend=args.backend)
    cls = classify(panel, args.G, args.M, RngSpec(seed), spec)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["unit_id", "h_i", "g_hat"])
    for i, u in enumerate(panel.unit_ids):
        w.writerow([u, int(cls.split.h[i]), int(cls.g_hat.labels[i])])
    _emit(buf.getvalue(), args.output)
    print(f"lambda_hat: {cls.lambda_hat!r}", file=sys.stderr)
    print(f"groups_found: {cls.n_found}", file=sys.stderr)
    return 0


def cmd_simulate(args) -> int:
    if args.threads < 1:
        raise PanelValueError("--threads must be at least 1")
    _positive("reps", args.reps)
    seed = _resolve_seed(args.seed)
    estimators = tuple(args.estimators.split(",")) if args.estimators else ESTIMATORS
    dynamic = args.dynamic
    if args.paper_table is not None:
        if args.config is not None:
            raise PanelValueError("--paper-table and --config are mutually exclusive")
        cells = paper_table_grid(args.paper_table, args.reps or 50, seed)
    else:
        text = args.config.read_text(encoding="utf-8") if args.config is not None else ""
        overrides = {
            "N": args.N, "T": args.T, "G": args.G, "M": args.M, "sigma2": args.sigma2,
            "reps": args.reps, "seed": seed, "theta": args.theta,
        }
        cfg, file_estimators, file_dynamic = parse_config(text, overrides)
        if not args.estimators:
            estimators = file_estimators
        dynamic = dynamic or file_dynamic
        cells = [cfg]
    summaries, per_rep = [], []
    for cfg in cells:
        results = run_replications(cfg, estimators, args.threads, args.backend, dynamic)
        summaries.append(summarize(cfg, results, estimators))
        per_rep.append(emit_replications(cfg, results, estimators))
        log.info("cell N=%d T=%d G=%d done", cfg.N, cfg.T, cfg.G)
    _emit(emit_table(summaries, args.format, estimators), args.output)
    if args.per_rep is not None:
        header, *rest = per_rep
        body = header + "".join(chunk.split("\n", 1)[1] for chunk in rest)
        args.per_rep.write_text(body, encoding="utf-8")
    failed = sum(s.n_failed for s in summaries)
    if failed:
        print(f"failed replications: {failed}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectral-panel", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    est = sub.add_parser("estimate", help="estimate slopes from a panel CSV")
    _add_panel_args(est)
    est.add_argument("--method", choices=METHODS, default="spectral")
    est.add_argument("--dynamic", action="store_true", help="add the lagged outcome as a regressor")
    est.add_argument("--ife", action="store_true", help="interactive fixed effects with --J factors")
    est.add_argument("--J", type=int, default=None)
    lam = est.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lam", type=float, default=None, help="l1 penalty (lasso)")
    lam.add_argument("--lambda-rule-C", dest="lambda_rule_C", type=float, default=None)
    est.add_argument("--groups", type=Path, default=None, help="CSV with unit_id,group (oracle)")
    est.add_argument("--format", choices=("csv", "markdown"), default="csv")
    est.set_defaults(func=cmd_estimate)

    cls = sub.add_parser("classify", help="assign units to groups")
    _add_panel_args(cls)
    cls.set_defaults(func=cmd_classify)

    sim = sub.add_parser("simulate", help="Monte Carlo replications")
    sim.add_argument("--paper-table", type=int, choices=(1, 2, 3, 4), default=None)
    sim.add_argument("--config", type=Path, default=None, help="key = value experiment file")
    for key, typ in (("N", int), ("T", int), ("G", int), ("M", int), ("sigma2", float), ("theta", float)):
        sim.add_argument(f"--{key}", type=typ, default=None)
    sim.add_argument("--reps", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--backend", choices=("auto", "dense", "randomized"), default="auto")
    sim.add_argument("--estimators", default=None, help="comma list from S,P-S,Oracle")
    sim.add_argument("--dynamic", action="store_true")
    sim.add_argument("--format", choices=("csv", "markdown"), default="csv")
    sim.add_argument("--output", type=Path, default=None)
    sim.add_argument("--per-rep", type=Path, default=None, help="per-replication CSV")
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except PanelValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PanelNumericError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
