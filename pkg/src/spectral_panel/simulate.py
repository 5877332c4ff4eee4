"""Monte Carlo harness for the grouped-panel designs.

Each replication ``r`` draws its data and estimator randomness from
``RngSpec(seed, r)`` and nothing else, so a run is bit-identical whatever the
number of worker threads.
"""

from __future__ import annotations

import csv
import io
import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .dgp import DgpConfig, generate_dgp, group_sizes
from .dynamic import augment_panel, dynamic_post_spectral, dynamic_spectral
from .errors import PanelNumericError, PanelValueError
from .panel import GroupAssignment, RngSpec
from .postspectral import oracle_ols, post_spectral
from .spectral import SpectralConfig, spectral_estimate

__all__ = [
    "DgpConfig",
    "generate_dgp",
    "group_sizes",
    "misclassification_rate",
    "ReplicationResult",
    "CellSummary",
    "run_replications",
    "summarize",
    "emit_table",
    "emit_replications",
    "paper_table_grid",
    "parse_config",
    "ESTIMATORS",
]

ESTIMATORS = ("S", "P-S", "Oracle")
EXACT_MATCHING_MAX = 8


def _labels(g) -> np.ndarray:
    return np.asarray(g.labels if isinstance(g, GroupAssignment) else g, dtype=np.int64)


def misclassification_rate(g_hat, g_true) -> float:
    """Share of units misclassified under the best matching of estimated to true labels.

    Labels are matched one-to-one (the smaller label set is mapped injectively
    into the larger). The search is exhaustive when both label sets have at
    most eight members and uses the Hungarian algorithm otherwise.
    """
    a, b = _labels(g_hat), _labels(g_true)
    if a.shape != b.shape:
        raise PanelValueError("assignments cover different numbers of units")
    n = a.size
    if n == 0:
        return 0.0
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    conf = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(conf, (ia, ib), 1.0)
    if conf.shape[0] > conf.shape[1]:
        conf = conf.T
    rows, cols = conf.shape
    if cols <= EXACT_MATCHING_MAX:
        maps = np.array(list(itertools.permutations(range(cols), rows)), dtype=np.intp)
        best = conf[np.arange(rows), maps].sum(axis=1).max()
    else:
        r, c = linear_sum_assignment(conf, maximize=True)
        best = conf[r, c].sum()
    return float(1.0 - best / n)


@dataclass(frozen=True)
class ReplicationResult:
    """Outcome of one replication. Coefficient vectors lead with the lag slope in dynamic runs."""

    rep_index: int
    truth: np.ndarray
    beta_tilde: np.ndarray | None = None
    beta_hat_ps: np.ndarray | None = None
    beta_hat_oracle: np.ndarray | None = None
    misclass_s: float | None = None
    groups_found: int | None = None
    wall_time: dict = field(default_factory=dict, compare=False)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def abs_error(self, estimator: str) -> float | None:
        est = {"S": self.beta_tilde, "P-S": self.beta_hat_ps, "Oracle": self.beta_hat_oracle}[estimator]
        if est is None:
            return None
        return float(np.mean(np.abs(est - self.truth)))


@dataclass(frozen=True)
class CellSummary:
    G: int
    sigma2: float
    M: int
    T: int
    N: int
    mae: dict
    misclass_s: float | None
    n_reps: int
    n_failed: int


def _one_rep(cfg: DgpConfig, r: int, estimators, backend: str, dynamic: bool) -> ReplicationResult:
    root = RngSpec(cfg.seed, r)
    clock = {}
    t0 = time.perf_counter()
    panel, truth, params = generate_dgp(cfg, root.child(0))
    clock["dgp"] = time.perf_counter() - t0
    target = params.beta if not dynamic else np.concatenate([[cfg.theta or 0.0], params.beta])
    out = {}
    try:
        if "S" in estimators:
            t0 = time.perf_counter()
            if dynamic:
                fit = dynamic_spectral(panel, cfg.G, cfg.M, backend, rng=root.child(1))
                out["beta_tilde"] = np.concatenate([[fit.theta_hat], fit.beta_hat])
            else:
                fit = spectral_estimate(panel, cfg.G, cfg.M, backend, rng=root.child(1))
                out["beta_tilde"] = fit.beta_tilde
            clock["S"] = time.perf_counter() - t0
        if "P-S" in estimators:
            t0 = time.perf_counter()
            spec = SpectralConfig.for_groups(cfg.G, cfg.M * (2 if dynamic else 1), backend=backend)
            if dynamic:
                dfit = dynamic_post_spectral(panel, cfg.G, cfg.M, root.child(2), spec)
                cls, fit = dfit.classification, dfit.inner
            else:
                cls, fit = post_spectral(panel, cfg.G, cfg.M, root.child(2), spec)
            out["beta_hat_ps"] = fit.beta_hat
            out["misclass_s"] = misclassification_rate(cls.g_hat, truth)
            out["groups_found"] = cls.n_found
            clock["P-S"] = time.perf_counter() - t0
        if "Oracle" in estimators:
            t0 = time.perf_counter()
            data = augment_panel(panel) if dynamic else panel
            out["beta_hat_oracle"] = oracle_ols(data, truth).beta_hat
            clock["Oracle"] = time.perf_counter() - t0
    except (PanelNumericError, PanelValueError) as exc:
        return ReplicationResult(r, target, wall_time=clock, error=f"{type(exc).__name__}: {exc}")
    return ReplicationResult(r, target, wall_time=clock, **out)


def run_replications(
    cfg: DgpConfig,
    estimators=ESTIMATORS,
    threads: int = 1,
    backend: str = "auto",
    dynamic: bool = False,
) -> list[ReplicationResult]:
    """Run ``cfg.n_reps`` replications; results are ordered by replication index.

    A replication whose estimator raises is kept with its ``error`` set and
    is left out of the averages.
    """
    unknown = set(estimators) - set(ESTIMATORS)
    if unknown:
        raise PanelValueError(f"unknown estimators {sorted(unknown)}")
    if threads < 1:
        raise PanelValueError("threads must be at least 1")
    if dynamic and cfg.theta is None:
        cfg = replace(cfg, theta=0.0)
    reps = range(cfg.n_reps)
    if threads == 1:
        return [_one_rep(cfg, r, estimators, backend, dynamic) for r in reps]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda r: _one_rep(cfg, r, estimators, backend, dynamic), reps))
    return sorted(results, key=lambda res: res.rep_index)


def summarize(cfg: DgpConfig, results, estimators=ESTIMATORS) -> CellSummary:
    ok = [res for res in results if not res.failed]
    mae = {}
    for est in estimators:
        errs = [res.abs_error(est) for res in ok]
        mae[est] = float(np.mean(errs)) if ok else None
    mis = [res.misclass_s for res in ok if res.misclass_s is not None]
    return CellSummary(
        cfg.G,
        cfg.sigma2,
        cfg.M,
        cfg.T,
        cfg.N,
        mae,
        float(np.mean(mis)) if mis else None,
        len(results),
        len(results) - len(ok),
    )


def _fmt(v) -> str:
    return "" if v is None else f"{v:.3f}"


def _table_rows(rows, estimators):
    header = ["G", "sigma2", "M", "T", "N", *estimators, "Misclass-S", "reps", "failed"]
    body = []
    for c in rows:
        body.append(
            [
                str(c.G),
                f"{c.sigma2:g}",
                str(c.M),
                str(c.T),
                str(c.N),
                *[_fmt(c.mae.get(e)) for e in estimators],
                _fmt(c.misclass_s),
                str(c.n_reps),
                str(c.n_failed),
            ]
        )
    return header, body


def emit_table(rows, fmt: str = "csv", estimators=ESTIMATORS) -> str:
    """Render cell summaries with three decimals, as CSV or a Markdown table."""
    header, body = _table_rows(rows, estimators)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(r) + " |" for r in body]
        return "\n".join(lines) + "\n"
    raise PanelValueError(f"unknown format {fmt!r}")


def emit_replications(cfg: DgpConfig, results, estimators=ESTIMATORS) -> str:
    """Per-replication CSV (no timings, so reruns are byte-identical)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["G", "sigma2", "M", "T", "N", "rep", *[f"abs_err_{e}" for e in estimators], "misclass_s", "error"])
    for res in results:
        w.writerow(
            [cfg.G, f"{cfg.sigma2:g}", cfg.M, cfg.T, cfg.N, res.rep_index]
            + [_fmt(None if res.failed else res.abs_error(e)) for e in estimators]
            + [_fmt(res.misclass_s), res.error or ""]
        )
    return buf.getvalue()


PAPER_TABLES = {1: (1.0, 1), 2: (4.0, 1), 3: (1.0, 2), 4: (4.0, 2)}


def paper_table_grid(table: int, n_reps: int = 50, seed: int = 0) -> list[DgpConfig]:
    """The 18 designs of a published table: G in (2, 7) by T in (20, 50, 100) by N in (100, 200, 400)."""
    if table not in PAPER_TABLES:
        raise PanelValueError("table must be 1, 2, 3 or 4")
    sigma2, m = PAPER_TABLES[table]
    return [
        DgpConfig(N=n, T=t, G=g, M=m, sigma2=sigma2, n_reps=n_reps, seed=seed)
        for g in (2, 7)
        for t in (20, 50, 100)
        for n in (100, 200, 400)
    ]


_CONFIG_KEYS = {
    "N": int,
    "T": int,
    "G": int,
    "M": int,
    "sigma2": float,
    "varrho": float,
    "trunc": float,
    "beta1": float,
    "beta2": float,
    "reps": int,
    "seed": int,
    "theta": float,
}


def _truthy(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise PanelValueError(f"not a boolean: {text!r}")


def parse_config(text: str, overrides: dict | None = None):
    """Parse ``key = value`` lines (``#`` starts a comment).

    Returns ``(DgpConfig, estimators, dynamic)``. ``overrides`` holds values
    that take precedence over the file, e.g. from command-line flags.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PanelValueError(f"config line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS and key not in ("estimators", "dynamic"):
            raise PanelValueError(f"config line {lineno}: unknown key {key!r}")
        raw[key] = value
    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = str(value)
    try:
        vals = {k: _CONFIG_KEYS[k](v) for k, v in raw.items() if k in _CONFIG_KEYS}
    except ValueError as exc:
        raise PanelValueError(f"bad config value: {exc}") from None
    missing = [k for k in ("N", "T", "G") if k not in vals]
    if missing:
        raise PanelValueError(f"config is missing {missing}")
    kw = {k: vals[k] for k in ("N", "T", "G", "M", "sigma2", "varrho", "trunc", "seed", "theta") if k in vals}
    if "reps" in vals:
        kw["n_reps"] = vals["reps"]
    defaults = {f.name: f.default for f in fields(DgpConfig)}
    beta = list(defaults["beta"])
    if "beta1" in vals:
        beta[0] = vals["beta1"]
    if "beta2" in vals:
        beta[1] = vals["beta2"]
    kw["beta"] = tuple(beta)
    estimators = tuple(e.strip() for e in raw.get("estimators", ",".join(ESTIMATORS)).split(",") if e.strip())
    dynamic = _truthy(raw.get("dynamic", "false"))
    return DgpConfig(**kw), estimators, dynamic
