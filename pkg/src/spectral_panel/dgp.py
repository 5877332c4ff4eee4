"""Simulation designs: the grouped-panel Monte Carlo DGP and an interactive-effects DGP."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PanelValueError
from .panel import BalancedPanel, DgpParams, GroupAssignment, RngSpec, sample_truncated_normal

__all__ = ["DgpConfig", "group_sizes", "generate_dgp", "generate_ife_panel"]


@dataclass(frozen=True)
class DgpConfig:
    """Monte Carlo design.

    Defaults reproduce the published designs: two covariates, slope
    (-1, 0.8), loading shift ``varrho = 3``, truncation constant 20 and 50
    replications. ``v_scale``/``z_scale`` multiply the idiosyncratic terms and
    are 1 except in noiseless checks. ``theta`` switches on the lagged
    outcome.
    """

    N: int
    T: int
    G: int
    M: int = 1
    d: int = 2
    sigma2: float = 1.0
    varrho: float = 3.0
    trunc: float = 20.0
    beta: tuple[float, ...] = (-1.0, 0.8)
    n_reps: int = 50
    seed: int = 0
    theta: float | None = None
    v_scale: float = 1.0
    z_scale: float = 1.0

    def __post_init__(self):
        if min(self.N, self.T, self.G, self.M, self.d) < 1:
            raise PanelValueError("N, T, G, M and d must be positive")
        if self.N < self.G:
            raise PanelValueError("need at least one unit per group")
        if len(self.beta) != self.d:
            raise PanelValueError(f"beta has {len(self.beta)} entries but d={self.d}")
        if self.sigma2 <= 0 or self.trunc <= 0:
            raise PanelValueError("sigma2 and trunc must be positive")
        if self.theta is not None and not abs(self.theta) < 1:
            raise PanelValueError("|theta| must be < 1")
        if self.n_reps < 1:
            raise PanelValueError("n_reps must be positive")


def group_sizes(n: int, g: int) -> list[int]:
    """Equal groups of ``n // g``; the remainder goes to the last group."""
    base = n // g
    return [base] * (g - 1) + [n - base * (g - 1)]


def _loadings(cfg: DgpConfig, rng: RngSpec) -> np.ndarray:
    z = sample_truncated_normal(rng, 1.0, cfg.trunc, (cfg.N, cfg.M, cfg.d))
    rho = np.zeros_like(z)
    rho[:, 0, :] = cfg.varrho + z[:, 0, :]
    if cfg.M >= 2:
        # second factor: unit-mean loading on the first covariate, centred on the rest
        rho[:, 1, :] = z[:, 1, :]
        rho[:, 1, 0] += 1.0
    if cfg.M >= 3:
        rho[:, 2:, :] = z[:, 2:, :]
    return rho


def generate_dgp(cfg: DgpConfig, rng: RngSpec):
    """Draw one panel from the grouped design.

    Returns ``(panel, true_groups, params)``. Units are ordered by group.
    """
    labels = np.repeat(np.arange(1, cfg.G + 1), group_sizes(cfg.N, cfg.G))
    idx = labels - 1
    alpha = sample_truncated_normal(rng.child(0), cfg.sigma2, cfg.trunc, (cfg.M, cfg.G, cfg.T))
    rho = _loadings(cfg, rng.child(1))
    z = cfg.z_scale * sample_truncated_normal(rng.child(2), 1.0, cfg.trunc, (cfg.N, cfg.T, cfg.d))
    v = cfg.v_scale * sample_truncated_normal(rng.child(3), 1.0, cfg.trunc, (cfg.N, cfg.T))

    # x_it = sum_m rho_im * alpha^m_{g_i t} + z_it
    alpha_units = alpha[:, idx, :]  # M x N x T
    x = np.einsum("imk,mit->itk", rho, alpha_units) + z
    beta = np.asarray(cfg.beta, dtype=np.float64)
    signal = x @ beta + alpha_units[0] + v
    if cfg.theta is None:
        y = signal
    else:
        y = np.empty_like(signal)
        prev = np.zeros(cfg.N)
        for t in range(cfg.T):
            prev = cfg.theta * prev + signal[:, t]
            y[:, t] = prev
    params = DgpParams(beta, alpha, rho, cfg.sigma2, cfg.trunc, cfg.theta)
    return BalancedPanel(y, x), GroupAssignment(labels, cfg.G), params


@dataclass(frozen=True)
class IfeDesign:
    beta: np.ndarray
    factors: np.ndarray = field(repr=False)
    kappa: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)


def generate_ife_panel(
    n: int,
    t: int,
    n_factors: int,
    rng: RngSpec,
    beta=(-1.0, 0.8),
    loading_shift: float = 1.0,
):
    """Interactive-effects panel ``y = x'beta + kappa_i'phi_t + v``, ``x = omega_i'phi_t + z``.

    Factors and loadings are standard Gaussian; ``omega`` is shifted by
    ``loading_shift`` so covariates correlate with the factor component.
    """
    beta = np.asarray(beta, dtype=np.float64)
    d = beta.size
    g = rng.generator()
    phi = g.standard_normal((t, n_factors))
    kappa = g.standard_normal((n, n_factors))
    omega = loading_shift + g.standard_normal((n, n_factors, d))
    z = g.standard_normal((n, t, d))
    v = g.standard_normal((n, t))
    x = np.einsum("ijk,tj->itk", omega, phi) + z
    y = x @ beta + kappa @ phi.T + v
    return BalancedPanel(y, x), IfeDesign(beta, phi, kappa, omega)
