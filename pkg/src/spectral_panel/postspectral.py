"""Pooled OLS with group-by-period intercepts and clustered standard errors.

Given a partition of units, the slope is obtained by demeaning ``y`` and
``x`` within each (group, period) cell and regressing one on the other. The
cell means of ``y - x'beta`` are the group time effects. Standard errors are
clustered by unit.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .classify import Classification, LambdaGrid, classify
from .errors import DimensionMismatch, EmptyGroup, PanelValueError, SingularGram
from .panel import BalancedPanel, GroupAssignment, RngSpec
from .spectral import SpectralConfig

__all__ = [
    "PostSpectralFit",
    "within_cells",
    "pooled_ols",
    "oracle_ols",
    "clustered_vcov",
    "post_spectral",
    "coef_rows",
    "format_coef_table",
]

GRAM_RCOND = 1e-12


@dataclass(frozen=True)
class PostSpectralFit:
    beta_hat: np.ndarray
    alpha_hat: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    sigma_check: np.ndarray = field(repr=False)
    omega_hat: np.ndarray = field(repr=False)
    vcov: np.ndarray = field(repr=False)
    std_errors: np.ndarray = field(default=None)
    groups_used: GroupAssignment = field(default=None, repr=False)

    @property
    def t_stats(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.beta_hat / self.std_errors


def _check_groups(panel: BalancedPanel, groups: GroupAssignment) -> None:
    if groups.n_units != panel.n_units:
        raise DimensionMismatch(
            f"assignment covers {groups.n_units} units but the panel has {panel.n_units}"
        )
    sizes = groups.sizes()
    if np.any(sizes == 0):
        empty = [int(g) + 1 for g in np.flatnonzero(sizes == 0)]
        raise EmptyGroup(f"groups {empty} have no units")


def _cell_means(a: np.ndarray, groups: GroupAssignment) -> np.ndarray:
    # a: N x T x ... ; returns G x T x ...
    out = np.empty((groups.n_groups,) + a.shape[1:])
    for g in range(groups.n_groups):
        out[g] = a[groups.labels == g + 1].mean(axis=0)
    return out


def within_cells(a: np.ndarray, groups: GroupAssignment) -> np.ndarray:
    """Subtract the (group, period) cell mean from every entry of ``a`` (N x T x ...)."""
    return a - _cell_means(a, groups)[groups.labels - 1]


def _solve_gram(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(gram)
    top = float(np.max(np.abs(w), initial=0.0))
    rcond = float(np.min(np.abs(w))) / top if top > 0 else 0.0
    if rcond < GRAM_RCOND:
        raise SingularGram(f"demeaned covariate Gram matrix is singular (rcond={rcond:.3e})")
    return np.linalg.solve(gram, rhs)


def clustered_vcov(fit: PostSpectralFit, panel: BalancedPanel):
    """Unit-clustered sandwich ``Sigma^{-1} Omega Sigma^{-1} / NT``.

    ``Sigma = sum x_check x_check' / NT`` and
    ``Omega = sum_i (sum_t v_it x_check_it)(sum_t v_it x_check_it)' / NT``.
    No degrees-of-freedom correction.

    Returns ``(vcov, std_errors, sigma_check, omega_hat)``.
    """
    n, t = panel.n_units, panel.n_periods
    nt = n * t
    xc = within_cells(panel.x, fit.groups_used)
    sigma = np.einsum("itk,itl->kl", xc, xc) / nt
    score = np.einsum("it,itk->ik", fit.residuals, xc)
    omega = score.T @ score / nt
    sigma_inv = _solve_gram(sigma, np.eye(sigma.shape[0]))
    vcov = sigma_inv @ omega @ sigma_inv / nt
    vcov = 0.5 * (vcov + vcov.T)
    se = np.sqrt(np.clip(np.diag(vcov), 0.0, None))
    return vcov, se, sigma, omega


def pooled_ols(panel: BalancedPanel, groups: GroupAssignment) -> PostSpectralFit:
    """Least squares with one intercept per (group, period) cell.

    Raises
    ------
    EmptyGroup
        Some label in ``1..groups.n_groups`` has no units.
    SingularGram
        The demeaned covariates are collinear.
    """
    _check_groups(panel, groups)
    n, t, d = panel.x.shape
    xc = within_cells(panel.x, groups)
    yc = within_cells(panel.y, groups)
    gram = np.einsum("itk,itl->kl", xc, xc)
    beta = _solve_gram(gram, np.einsum("itk,it->k", xc, yc))
    e = panel.y - panel.x @ beta
    alpha = _cell_means(e, groups)
    resid = e - alpha[groups.labels - 1]
    partial = PostSpectralFit(beta, alpha, resid, None, None, None, None, groups)
    vcov, se, sigma, omega = clustered_vcov(partial, panel)
    return PostSpectralFit(beta, alpha, resid, sigma, omega, vcov, se, groups)


def oracle_ols(panel: BalancedPanel, true_groups: GroupAssignment) -> PostSpectralFit:
    """Pooled OLS on the true partition (the infeasible benchmark)."""
    return pooled_ols(panel, true_groups)


def post_spectral(
    panel: BalancedPanel,
    n_groups: int,
    n_factors: int = 1,
    rng: RngSpec = RngSpec(0),
    cfg: SpectralConfig | None = None,
    grid_cfg: LambdaGrid | None = None,
) -> tuple[Classification, PostSpectralFit]:
    """Classify, then run pooled OLS with however many groups the classifier produced."""
    cls = classify(panel, n_groups, n_factors, rng, cfg, grid_cfg)
    return cls, pooled_ols(panel, cls.g_hat)


def coef_rows(fit: PostSpectralFit, names=None) -> list[tuple[str, float, float, float]]:
    d = fit.beta_hat.size
    names = list(names) if names is not None else [f"x{k + 1}" for k in range(d)]
    if len(names) != d:
        raise PanelValueError(f"{len(names)} names for {d} coefficients")
    return [
        (names[k], float(fit.beta_hat[k]), float(fit.std_errors[k]), float(fit.t_stats[k]))
        for k in range(d)
    ]


def format_coef_table(fit: PostSpectralFit, names=None, fmt: str = "csv") -> str:
    """Coefficient, clustered standard error and t statistic per covariate."""
    rows = coef_rows(fit, names)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["term", "estimate", "std_error", "t_stat"])
        w.writerows([(n, repr(b), repr(s), repr(z)) for n, b, s, z in rows])
        return buf.getvalue()
    if fmt == "markdown":
        lines = ["| term | estimate | std_error | t_stat |", "|---|---|---|---|"]
        lines += [f"| {n} | {b:.6f} | {s:.6f} | {z:.3f} |" for n, b, s, z in rows]
        return "\n".join(lines) + "\n"
    raise PanelValueError(f"unknown format {fmt!r}")
