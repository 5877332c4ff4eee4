import numpy as np
import pytest

from spectral_panel.dgp import DgpConfig, generate_dgp
from spectral_panel.dynamic import (
    augment_panel,
    dynamic_k_eigs,
    dynamic_post_spectral,
    dynamic_spectral,
)
from spectral_panel.errors import TooFewPeriods
from spectral_panel.panel import BalancedPanel, RngSpec
from spectral_panel.postspectral import oracle_ols, post_spectral


def test_augment_t3():
    rng = np.random.default_rng(0)
    p = BalancedPanel(rng.standard_normal((4, 3)), rng.standard_normal((4, 3, 2)), period_ids=("a", "b", "c"))
    q = augment_panel(p)
    assert (q.n_periods, q.n_covariates) == (2, 3)
    np.testing.assert_array_equal(q.x[:, 0, 0], p.y[:, 0])
    np.testing.assert_array_equal(q.x[:, 1, 0], p.y[:, 1])
    assert tuple(q.period_ids) == ("b", "c")


def test_round_trip_strip_lag():
    rng = np.random.default_rng(1)
    p = BalancedPanel(rng.standard_normal((5, 6)), rng.standard_normal((5, 6, 2)))
    q = augment_panel(p)
    np.testing.assert_array_equal(q.x[:, :, 1:], p.x[:, 1:, :])
    np.testing.assert_array_equal(q.y, p.y[:, 1:])


def test_too_few_periods():
    p = BalancedPanel(np.zeros((3, 2)), np.zeros((3, 2, 1)))
    with pytest.raises(TooFewPeriods):
        augment_panel(p)
    with pytest.raises(TooFewPeriods):
        dynamic_spectral(p, 2)


def test_k_eigs():
    assert dynamic_k_eigs(2, 1) == 10
    assert dynamic_k_eigs(7, 2) == 58
    p, _, _ = generate_dgp(DgpConfig(N=60, T=12, G=2, theta=0.3), RngSpec(2))
    fit = dynamic_spectral(p, 2, backend="dense")
    assert fit.inner.k_eigs == dynamic_k_eigs(2, 1)
    assert fit.effective_T == 11


def test_theta_recovered_post_spectral():
    errs = []
    for r in range(5):
        p, g, par = generate_dgp(DgpConfig(N=200, T=50, G=2, sigma2=4.0, theta=0.5), RngSpec(3, r))
        fit = dynamic_post_spectral(p, 2, rng=RngSpec(4, r))
        errs.append(abs(fit.theta_hat - 0.5))
        assert fit.classification is not None
    assert np.median(errs) <= 0.02


def test_theta_zero_reduction_small():
    th, dyn, sta = [], [], []
    for r in range(5):
        p, _, par = generate_dgp(DgpConfig(N=200, T=50, G=2, theta=0.0), RngSpec(5, r))
        fit = dynamic_post_spectral(p, 2, rng=RngSpec(6, r))
        th.append(abs(fit.theta_hat))
        dyn.append(np.abs(fit.beta_hat - par.beta).mean())
        sta.append(np.abs(post_spectral(p, 2, rng=RngSpec(6, r))[1].beta_hat - par.beta).mean())
    assert np.median(th) <= 0.05
    assert np.mean(dyn) <= 2 * np.mean(sta) + 0.002


def test_noise_lag_column_changes_nothing_material():
    # a useless extra regressor of the lag's scale leaves the slope estimates alone
    diffs, errs = [], []
    for r in range(20):
        p, g, par = generate_dgp(DgpConfig(N=200, T=30, G=2), RngSpec(7, r))
        q = augment_panel(p)
        noise = np.random.default_rng(r).standard_normal(q.y.shape) * q.x[:, :, 0].std()
        x = np.concatenate([noise[:, :, None], q.x[:, :, 1:]], axis=2)
        a = oracle_ols(BalancedPanel(q.y, x), g).beta_hat[1:]
        b = oracle_ols(BalancedPanel(q.y, q.x[:, :, 1:]), g).beta_hat
        diffs.append(np.abs(a - b).max())
        errs.append(np.abs(b - par.beta).max())
    assert np.mean(diffs) <= 0.25 * np.mean(errs)


def test_explosive_estimate_warns():
    rng = np.random.default_rng(8)
    n, t = 40, 10
    y = np.cumsum(rng.standard_normal((n, t)), axis=1) * 1.3 ** np.arange(t)
    p = BalancedPanel(y, rng.standard_normal((n, t, 1)))
    from spectral_panel.dynamic import _flag

    with pytest.warns(RuntimeWarning):
        _flag(1.2)
    fit = dynamic_spectral(p, 1, backend="dense")
    assert np.isfinite(fit.theta_hat)
