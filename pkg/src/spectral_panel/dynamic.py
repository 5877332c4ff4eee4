"""Dynamic panels: the lagged outcome enters as an extra covariate.

The lag of ``y`` loads on the group effects through the recursion, so the
augmented covariate vector carries twice as many factors. The static
machinery is reused with ``M`` doubled and one more slope.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .classify import Classification, LambdaGrid
from .errors import TooFewPeriods
from .panel import BalancedPanel, RngSpec
from .postspectral import PostSpectralFit, post_spectral
from .spectral import SpectralConfig, SpectralFit, reconstruct_quadratic

__all__ = ["DynamicFit", "augment_panel", "dynamic_k_eigs", "dynamic_spectral", "dynamic_post_spectral"]


@dataclass(frozen=True)
class DynamicFit:
    theta_hat: float
    beta_hat: np.ndarray
    inner: SpectralFit | PostSpectralFit
    effective_T: int
    classification: Classification | None = None


def augment_panel(panel: BalancedPanel) -> BalancedPanel:
    """Drop the first period and prepend ``y_{t-1}`` to the covariates.

    Raises
    ------
    TooFewPeriods
        Fewer than three periods.
    """
    t = panel.n_periods
    if t < 3:
        raise TooFewPeriods(f"dynamic model needs T >= 3, got T={t}")
    lag = panel.y[:, :-1, None]
    x = np.concatenate([lag, panel.x[:, 1:, :]], axis=2)
    periods = panel.period_ids[1:] if panel.period_ids else ()
    return BalancedPanel(panel.y[:, 1:].copy(), x, panel.unit_ids, periods)


def dynamic_k_eigs(n_groups: int, n_factors: int) -> int:
    """Eigenvalue count for the augmented model, ``2 * G * (2M) + 2``."""
    return 2 * n_groups * (2 * n_factors) + 2


def _flag(theta: float) -> None:
    if not abs(theta) < 1:
        warnings.warn(f"estimated autoregressive coefficient {theta:.4f} is outside (-1, 1)", RuntimeWarning, stacklevel=3)


def dynamic_spectral(
    panel: BalancedPanel,
    n_groups: int,
    n_factors: int = 1,
    backend: str = "auto",
    *,
    rng: RngSpec = RngSpec(0),
) -> DynamicFit:
    """Spectral estimate of ``(theta, beta)`` on the lag-augmented panel."""
    aug = augment_panel(panel)
    cfg = SpectralConfig.for_groups(n_groups, 2 * n_factors, backend=backend, rng=rng)
    assert cfg.nominal_k == dynamic_k_eigs(n_groups, n_factors)
    fit = reconstruct_quadratic(aug, cfg)
    theta = float(fit.beta_tilde[0])
    _flag(theta)
    return DynamicFit(theta, fit.beta_tilde[1:].copy(), fit, aug.n_periods)


def dynamic_post_spectral(
    panel: BalancedPanel,
    n_groups: int,
    n_factors: int = 1,
    rng: RngSpec = RngSpec(0),
    cfg: SpectralConfig | None = None,
    grid_cfg: LambdaGrid | None = None,
) -> DynamicFit:
    """Classification plus pooled OLS on the lag-augmented panel."""
    aug = augment_panel(panel)
    if cfg is None:
        cfg = SpectralConfig.for_groups(n_groups, 2 * n_factors)
    cls, fit = post_spectral(aug, n_groups, 2 * n_factors, rng, cfg, grid_cfg)
    theta = float(fit.beta_hat[0])
    _flag(theta)
    return DynamicFit(theta, fit.beta_hat[1:].copy(), fit, aug.n_periods, cls)
