"""Cross-fitted spectral classification of units into latent groups.

Units are split at random into two halves. Each half yields a spectral slope
estimate and the leading G-dimensional eigenspace of its residual
second-moment matrix; every unit's residual path is then projected onto the
eigenspace estimated from the *other* half. A greedy threshold pass clusters
the projected paths, and the threshold is the smallest one that produces at
most G clusters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist

from . import _kernels
from .errors import DegenerateSplit, PanelValueError, TSmallerThanG
from .panel import BalancedPanel, GroupAssignment, RngSpec, residuals
from .spectral import SpectralConfig, reconstruct_quadratic

__all__ = [
    "SplitPlan",
    "Classification",
    "make_split",
    "projected_vectors",
    "run_classification_algorithm",
    "find_lambda_hat",
    "classify",
]

MAX_SPLIT_RETRIES = 64


@dataclass(frozen=True)
class SplitPlan:
    """Fair coin per unit. ``I0`` holds units with ``h == 1`` and ``I1`` those with ``h == 0``."""

    h: np.ndarray
    rng: RngSpec | None = None

    def __post_init__(self):
        h = np.asarray(self.h, dtype=np.int8)
        if h.ndim != 1 or not np.all((h == 0) | (h == 1)):
            raise PanelValueError("split labels must be 0/1")
        if h.all() or not h.any():
            raise DegenerateSplit("both halves of the split must be nonempty")
        h = h.copy()
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def I0(self) -> np.ndarray:
        return np.flatnonzero(self.h == 1)

    @property
    def I1(self) -> np.ndarray:
        return np.flatnonzero(self.h == 0)

    def half(self, which: int) -> np.ndarray:
        return self.I0 if which == 0 else self.I1


def make_split(n_units: int, rng: RngSpec) -> SplitPlan:
    """I.i.d. Bernoulli(1/2) labels, redrawn on fresh substreams while a half is empty."""
    if n_units < 2:
        raise DegenerateSplit("need at least two units to split")
    for attempt in range(MAX_SPLIT_RETRIES + 1):
        stream = rng if attempt == 0 else rng.child(attempt)
        h = stream.generator().integers(0, 2, size=n_units)
        if 0 < h.sum() < n_units:
            return SplitPlan(h, stream)
    raise DegenerateSplit(f"no nondegenerate split after {MAX_SPLIT_RETRIES} retries")


@dataclass(frozen=True)
class Classification:
    g_hat: GroupAssignment
    lambda_hat: float
    a_hat: np.ndarray = field(repr=False)
    f_hat_mats: tuple[np.ndarray, np.ndarray] = field(repr=False)
    beta_halves: tuple[np.ndarray, np.ndarray] = ()
    m_curve: tuple[tuple[float, int], ...] = field(default=(), repr=False)
    split: SplitPlan | None = field(default=None, repr=False)

    @property
    def n_found(self) -> int:
        return self.g_hat.n_groups


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-14 * np.max(np.abs(col), initial=0.0))
        if nz.size and col[nz[0]] < 0:
            out[:, j] = -col
    return out


def leading_eigvecs(b: np.ndarray, n_vecs: int) -> np.ndarray:
    """Orthonormal eigenvectors of the ``n_vecs`` largest eigenvalues (descending), signs fixed."""
    _, v = np.linalg.eigh(0.5 * (b + b.T))
    return _fix_signs(v[:, ::-1][:, :n_vecs])


def projected_vectors(
    panel: BalancedPanel,
    split: SplitPlan,
    n_groups: int,
    spectral_cfg: SpectralConfig,
):
    """Cross-fitted projections of each unit's residual path.

    For each half ``h`` the slope ``beta^h`` is estimated on ``I_h`` and
    ``F_h`` holds the top ``n_groups`` eigenvectors of
    ``B^h = 2/(NT) * sum_{i in I_h} r_i r_i'`` (N is the full sample size).
    A unit in ``I_0`` is projected with the objects from ``I_1`` and vice versa.

    Returns ``(a_hat, (F_0, F_1), (beta^0, beta^1))``.
    """
    n, t = panel.n_units, panel.n_periods
    if t < n_groups:
        raise TSmallerThanG(f"T={t} is smaller than G={n_groups}")
    a_hat = np.empty((n, t))
    f_mats, betas = [], []
    for which in (0, 1):
        fit_units = split.half(which)
        fit = reconstruct_quadratic(panel.subset(fit_units), spectral_cfg)
        r_fit = residuals(panel, fit.beta_tilde)[fit_units]
        b_mat = (2.0 / (n * t)) * (r_fit.T @ r_fit)
        f = leading_eigvecs(b_mat, n_groups)
        f_mats.append(f)
        betas.append(fit.beta_tilde)
        # units carrying label h == which sit in the other half
        targets = split.half(1 - which)
        r_t = residuals(panel, fit.beta_tilde)[targets]
        a_hat[targets] = (r_t @ f) @ f.T
    return a_hat, tuple(f_mats), tuple(betas)


def _reduced_coords(a_hat: np.ndarray) -> np.ndarray:
    # rotate onto the row space; pairwise distances are unchanged
    a = np.ascontiguousarray(a_hat, dtype=np.float64)
    if a.shape[0] == 0:
        return a
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    keep = s > 1e-12 * s[0] if s.size and s[0] > 0 else np.zeros(s.size, dtype=bool)
    if not keep.any():
        return np.zeros((a.shape[0], 1))
    return np.ascontiguousarray(u[:, keep] * s[keep])


def _labels_from_partition(labels0: np.ndarray, m: int) -> GroupAssignment:
    return GroupAssignment(labels0 + 1, max(m, 1))


def run_classification_algorithm(a_hat, lam: float):
    """Greedy pass over units in index order with membership radius ``lam``.

    A unit joins the lowest-indexed group whose running mean lies within
    ``lam`` (Euclidean), otherwise it starts a new group.

    Returns ``(GroupAssignment, m)``.
    """
    if lam < 0:
        raise PanelValueError("lambda must be nonnegative")
    a = np.ascontiguousarray(a_hat, dtype=np.float64)
    labels, m = _kernels.greedy_pass(a, float(lam), a.shape[0])
    return _labels_from_partition(labels, m), m


@dataclass(frozen=True)
class LambdaGrid:
    """Search settings: bisection tolerance relative to the largest pairwise distance."""

    rel_tol: float = 1e-9


def find_lambda_hat(a_hat, n_groups: int, grid_cfg: LambdaGrid | None = None):
    """Smallest radius with at most ``n_groups`` groups.

    Candidates are 0 and every pairwise distance, scanned in ascending order
    (the group count need not be monotone in the radius). Between the first
    feasible candidate and its predecessor the transition is located by
    bisection.

    Returns ``(lambda_hat, GroupAssignment, m_curve)``.
    """
    if n_groups < 1:
        raise PanelValueError("G must be at least 1")
    grid_cfg = grid_cfg or LambdaGrid()
    a = np.ascontiguousarray(a_hat, dtype=np.float64)
    n = a.shape[0]
    coords = _reduced_coords(a)
    dists = pdist(coords) if n > 1 else np.zeros(0)
    cands = np.unique(np.concatenate([[0.0], dists]))
    max_dist = float(cands[-1])
    j = int(_kernels.first_feasible(coords, cands, n_groups))
    if j < 0:
        # rounding at the largest distance; nudge past it
        cands = np.append(cands, np.nextafter(max_dist, np.inf) * (1 + 1e-12))
        j = cands.size - 1
    curve = []

    def count(lam):
        _, m = _kernels.greedy_pass(coords, lam, n_groups)
        curve.append((float(lam), int(m)))
        return m

    hi = float(cands[j])
    if j > 0:
        lo = float(cands[j - 1])
        curve.append((lo, n_groups + 1))
        tol = grid_cfg.rel_tol * max_dist
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if count(mid) <= n_groups:
                hi = mid
            else:
                lo = mid
    labels, m = _kernels.greedy_pass(coords, hi, n)
    curve.append((hi, int(m)))
    return hi, _labels_from_partition(labels, m), tuple(sorted(curve))


def classify(
    panel: BalancedPanel,
    n_groups: int,
    n_factors: int = 1,
    rng: RngSpec = RngSpec(0),
    cfg: SpectralConfig | None = None,
    grid_cfg: LambdaGrid | None = None,
) -> Classification:
    """Split, project and cluster; the end-to-end classifier.

    ``cfg`` sets the spectral step (defaults to ``2GM + 2`` eigenvalues,
    automatic backend); its random stream is replaced by a child of ``rng``.
    """
    if n_groups < 1:
        raise PanelValueError("G must be at least 1")
    if cfg is None:
        cfg = SpectralConfig.for_groups(n_groups, n_factors)
    cfg = _with_rng(cfg, rng.child(1))
    split = make_split(panel.n_units, rng.child(0))
    a_hat, f_mats, betas = projected_vectors(panel, split, n_groups, cfg)
    lam, groups, curve = find_lambda_hat(a_hat, n_groups, grid_cfg)
    return Classification(groups, lam, a_hat, f_mats, betas, curve, split)


def _with_rng(cfg: SpectralConfig, rng: RngSpec) -> SpectralConfig:
    from dataclasses import replace

    return replace(cfg, rng=rng)
