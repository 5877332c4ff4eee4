"""Spectral estimator of the slope vector.

For a candidate slope ``b`` the N x N matrix

    A^b[i, j] = (1 / NT) * sum_t ((y_it - x_it'b) - (y_jt - x_jt'b))^2

has, up to a vanishing remainder, only ``2GM + 2`` non-negligible eigenvalues,
and their sum is a convex quadratic in ``b`` minimised at the true slope. The
estimator evaluates that eigenvalue sum at ``0``, ``+-e_k`` and ``e_k + e_l``,
reads off the quadratic's coefficients and returns its minimiser.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

from .eigsolve import (
    DENSE_MAX_DIM,
    RandEigConfig,
    SymmetricOperator,
    dense_eigvals,
    topk_abs_eigs,
)
from .errors import PanelValueError, SingularSigma
from .panel import BalancedPanel, RngSpec, residuals

__all__ = [
    "SpectralConfig",
    "SpectralFit",
    "make_A_operator",
    "dense_A",
    "f_hat",
    "probe_points",
    "quadratic_from_probes",
    "quadratic_terms",
    "reconstruct_quadratic",
    "spectral_estimate",
    "spectral_estimate_ife",
    "estimate_gm_product",
]

SINGULAR_RCOND = 1e-12


@dataclass(frozen=True)
class SpectralConfig:
    """How many eigenvalues to sum and how to compute them.

    ``gm_product`` is G*M for grouped panels or J for interactive effects; the
    number of summed eigenvalues defaults to ``2 * gm_product + 2``.
    ``k_eigs`` overrides that rule (e.g. ``2 * (G + M + 1)``).
    """

    gm_product: int
    k_eigs: int | None = None
    backend: str = "auto"
    rand_p: int = 10
    rand_q: int | None = None
    rng: RngSpec = RngSpec(0)
    dense_max_dim: int = DENSE_MAX_DIM

    def __post_init__(self):
        if self.gm_product < 1:
            raise PanelValueError("gm_product must be at least 1")
        if self.k_eigs is not None and self.k_eigs < 1:
            raise PanelValueError("k_eigs must be at least 1")
        if self.backend not in ("auto", "dense", "randomized"):
            raise PanelValueError(f"unknown eigen backend {self.backend!r}")

    @classmethod
    def for_groups(cls, n_groups: int, n_factors: int = 1, rule: str = "product", **kw):
        """Config for a grouped panel. ``rule="sum"`` sums ``2(G + M + 1)`` eigenvalues."""
        if n_groups < 1 or n_factors < 1:
            raise PanelValueError("G and M must be positive")
        if rule == "product":
            return cls(n_groups * n_factors, **kw)
        if rule == "sum":
            kw.setdefault("k_eigs", 2 * (n_groups + n_factors + 1))
            return cls(n_groups * n_factors, **kw)
        raise PanelValueError(f"unknown eigenvalue-count rule {rule!r}")

    @property
    def nominal_k(self) -> int:
        return self.k_eigs if self.k_eigs is not None else 2 * self.gm_product + 2

    def resolved_k(self, n_units: int) -> int:
        k = self.nominal_k
        if k > n_units:
            warnings.warn(
                f"{k} eigenvalues requested but only {n_units} units; using all of them",
                RuntimeWarning,
                stacklevel=3,
            )
            k = n_units
        return k


@dataclass(frozen=True)
class SpectralFit:
    beta_tilde: np.ndarray
    sigma_hat: np.ndarray
    s_hat: np.ndarray
    l_hat: float
    probe_values: dict = field(repr=False)
    condition: tuple[float, float] = (float("nan"), float("nan"))
    k_eigs: int = 0


def make_A_operator(panel: BalancedPanel, b) -> SymmetricOperator:
    """Matrix-free ``A^b``; each product costs O(NT).

    With residuals R and row sums of squares s,
    ``A v = (s * sum(v) + 1 * (s @ v) - 2 R (R' v)) / NT``.
    The ``dense`` attribute is filled lazily by :func:`dense_A`.
    """
    r = residuals(panel, b)
    n, t = r.shape
    s = np.einsum("it,it->i", r, r)
    scale = 1.0 / (n * t)

    def apply(v):
        if v.ndim == 1:
            return scale * (s * v.sum() + (s @ v) - 2.0 * (r @ (r.T @ v)))
        return scale * (np.outer(s, v.sum(axis=0)) + (s @ v)[None, :] - 2.0 * (r @ (r.T @ v)))

    op = SymmetricOperator(n, apply)
    op.residuals = r
    return op


def dense_A(panel: BalancedPanel, b) -> np.ndarray:
    """Explicit ``A^b`` from pairwise squared differences (zero diagonal, entries >= 0)."""
    r = residuals(panel, b)
    a = cdist(r, r, "sqeuclidean")
    a /= r.size
    np.fill_diagonal(a, 0.0)
    return a


def _eigen_sum(panel: BalancedPanel, b, cfg: SpectralConfig, k: int, rng: RngSpec) -> float:
    n = panel.n_units
    use_dense = cfg.backend == "dense" or (cfg.backend == "auto" and n <= cfg.dense_max_dim)
    if use_dense:
        lam = dense_eigvals(SymmetricOperator.from_dense(dense_A(panel, b)))[:k]
    else:
        op = make_A_operator(panel, b)
        lam = topk_abs_eigs(op, k, "randomized", RandEigConfig(k, cfg.rand_p, cfg.rand_q, rng))
    return float(np.sum(lam))


def f_hat(panel: BalancedPanel, b, cfg: SpectralConfig) -> float:
    """Sum of the ``k_eigs`` largest-in-magnitude eigenvalues of ``A^b``."""
    return _eigen_sum(panel, b, cfg, cfg.resolved_k(panel.n_units), cfg.rng)


def probe_points(d: int) -> list[np.ndarray]:
    """``0``, then ``e_k, -e_k`` for each k, then ``e_k + e_l`` for k > l."""
    eye = np.eye(d)
    pts = [np.zeros(d)]
    for k in range(d):
        pts += [eye[k].copy(), -eye[k]]
    for k in range(d):
        for l in range(k):
            pts.append(eye[k] + eye[l])
    return pts


def quadratic_from_probes(f: Callable[[np.ndarray], float], d: int):
    """Recover ``(Sigma, S, L)`` of ``b'Sigma b + S'b + L`` from values of ``f`` at the probe set.

    Returns ``(sigma, s, l, values)`` where ``values`` maps probe tuples to f.
    """
    if d < 1:
        raise PanelValueError("need at least one covariate")
    values = {tuple(float(c) for c in p): float(f(p)) for p in probe_points(d)}
    eye = np.eye(d)

    def at(v):
        return values[tuple(float(c) for c in v)]

    l_hat = at(np.zeros(d))
    s_hat = np.empty(d)
    sigma = np.empty((d, d))
    for k in range(d):
        fp, fm = at(eye[k]), at(-eye[k])
        s_hat[k] = (fp - fm) / 2.0
        sigma[k, k] = (fp + fm) / 2.0 - l_hat
    for k in range(d):
        for l in range(k):
            v = (at(eye[k] + eye[l]) - sigma[k, k] - sigma[l, l] - s_hat[k] - s_hat[l] - l_hat) / 2.0
            sigma[k, l] = sigma[l, k] = v
    return sigma, s_hat, l_hat, values


def minimiser(sigma: np.ndarray, s_hat: np.ndarray, scale: float = 0.0) -> tuple[np.ndarray, tuple[float, float]]:
    """``-Sigma^{-1} S / 2`` with a conditioning check; returns (beta, (min eig, max eig)).

    ``scale`` is the magnitude of the probe values; a form whose eigenvalues
    are all below ``1e-12 * scale`` is rounding noise and counts as singular.
    """
    w = np.linalg.eigvalsh(sigma)
    cond = (float(w[0]), float(w[-1]))
    big = float(np.max(np.abs(w)))
    rcond = float(np.min(np.abs(w))) / big if big > SINGULAR_RCOND * scale else 0.0
    if rcond < SINGULAR_RCOND:
        raise SingularSigma(
            f"reconstructed quadratic form is singular (rcond={rcond:.3e}, eigenvalues={w})",
            eigenvalues=w,
            rcond=rcond,
        )
    return -0.5 * np.linalg.solve(sigma, s_hat), cond


def quadratic_terms(panel: BalancedPanel, cfg: SpectralConfig):
    """Eigenvalue sums on the probe set turned into ``(Sigma, S, L, values, k)``.

    Probe ``j`` draws its sketch from ``cfg.rng.child(j)``.
    """
    k = cfg.resolved_k(panel.n_units)
    counter = iter(range(10**9))

    def f(b):
        return _eigen_sum(panel, b, cfg, k, cfg.rng.child(next(counter)))

    sigma, s_hat, l_hat, values = quadratic_from_probes(f, panel.n_covariates)
    return sigma, s_hat, l_hat, values, k


def reconstruct_quadratic(panel: BalancedPanel, cfg: SpectralConfig) -> SpectralFit:
    """Evaluate the eigenvalue sum on the probe set and return its fitted minimiser.

    Raises
    ------
    SingularSigma
        The reconstructed d x d form is not invertible; no regularisation is applied.
    """
    sigma, s_hat, l_hat, values, k = quadratic_terms(panel, cfg)
    beta, cond = minimiser(sigma, s_hat, max(abs(v) for v in values.values()))
    return SpectralFit(beta, sigma, s_hat, l_hat, values, cond, k)


def spectral_estimate(
    panel: BalancedPanel,
    n_groups: int,
    n_factors: int = 1,
    backend: str = "auto",
    *,
    rule: str = "product",
    k_eigs: int | None = None,
    rng: RngSpec = RngSpec(0),
) -> SpectralFit:
    """Spectral estimate summing ``2GM + 2`` eigenvalues (or ``k_eigs``)."""
    kw = {"backend": backend, "rng": rng}
    if k_eigs is not None:
        kw["k_eigs"] = k_eigs
    cfg = SpectralConfig.for_groups(n_groups, n_factors, rule, **kw)
    return reconstruct_quadratic(panel, cfg)


def spectral_estimate_ife(
    panel: BalancedPanel, n_factors: int, backend: str = "auto", *, rng: RngSpec = RngSpec(0)
) -> SpectralFit:
    """Spectral estimate for interactive fixed effects with ``n_factors`` factors (2J + 2 eigenvalues)."""
    if n_factors < 1:
        raise PanelValueError("the number of factors J must be at least 1")
    return reconstruct_quadratic(panel, SpectralConfig(n_factors, backend=backend, rng=rng))


def default_threshold(eigenvalues: np.ndarray, panel: BalancedPanel, exponent: float = -1 / 3) -> float:
    """``||A^0||_2 * min(N, T)^exponent``."""
    return float(np.max(np.abs(eigenvalues), initial=0.0)) * min(panel.n_units, panel.n_periods) ** exponent


def estimate_gm_product(panel: BalancedPanel, threshold_rule=None) -> int:
    """Guess G*M by counting eigenvalues of ``A^0`` above a threshold.

    ``threshold_rule`` is None (default rule), a float exponent for the default
    rule, or a callable ``(eigenvalues, panel) -> tau``.
    """
    lam = dense_eigvals(SymmetricOperator.from_dense(dense_A(panel, np.zeros(panel.n_covariates))))
    if threshold_rule is None:
        tau = default_threshold(lam, panel)
    elif callable(threshold_rule):
        tau = float(threshold_rule(lam, panel))
    else:
        tau = default_threshold(lam, panel, float(threshold_rule))
    count = int(np.sum(np.abs(lam) > tau))
    return max(math.ceil((count - 2) / 2), 1)
