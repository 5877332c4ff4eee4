"""Symmetric eigenvalue backends.

``dense_eigs`` materialises the operator and runs LAPACK; it is the oracle and
the default for small problems. ``randomized_topk_abs_eigs`` is the
sketch-and-project algorithm of Halko, Martinsson and Tropp specialised to the
k largest-in-magnitude eigenvalues of a symmetric operator, and only needs
matrix-vector products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateSketch, NonSymmetric, PanelValueError
from .panel import RngSpec

DENSE_MAX_DIM = 512

__all__ = [
    "SymmetricOperator",
    "RandEigConfig",
    "dense_eigs",
    "dense_eigvals",
    "randomized_topk_abs_eigs",
    "topk_abs_eigs",
    "DENSE_MAX_DIM",
]


@dataclass
class SymmetricOperator:
    """A symmetric linear map on R^dim given by its action on blocks of vectors.

    ``apply`` must accept an ``(dim,)`` vector or a ``(dim, k)`` block. The
    ``n_applied`` counter records how many vectors have been pushed through.
    """

    dim: int
    apply_fn: Callable[[np.ndarray], np.ndarray]
    dense: np.ndarray | None = None
    n_applied: int = field(default=0, compare=False)

    @classmethod
    def from_dense(cls, a) -> "SymmetricOperator":
        a = np.asarray(a, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise PanelValueError(f"expected a square matrix, got shape {a.shape}")
        return cls(a.shape[0], lambda v: a @ v, dense=a)

    def apply(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        self.n_applied += 1 if v.ndim == 1 else v.shape[1]
        return self.apply_fn(v)

    def __matmul__(self, v):
        return self.apply(v)

    def to_dense(self) -> np.ndarray:
        if self.dense is not None:
            return self.dense
        return self.apply(np.eye(self.dim))


@dataclass(frozen=True)
class RandEigConfig:
    """Knobs for the randomized eigensolver.

    ``q=None`` means ``ceil(log(dim))`` power steps.
    """

    k: int
    p: int = 10
    q: int | None = None
    rng: RngSpec = RngSpec(0)

    def power_depth(self, dim: int) -> int:
        return int(math.ceil(math.log(dim))) if self.q is None else int(self.q)

    def validate(self, dim: int) -> None:
        if self.k < 1 or self.p < 1:
            raise PanelValueError("need k >= 1 and p >= 1")
        if self.q is not None and self.q < 0:
            raise PanelValueError("need q >= 0")
        if self.k + self.p > dim:
            raise PanelValueError(f"k + p = {self.k + self.p} exceeds dimension {dim}")


def _order_by_magnitude(w: np.ndarray) -> np.ndarray:
    return np.argsort(-np.abs(w), kind="stable")


def _checked_dense(op: SymmetricOperator, sym_tol: float) -> np.ndarray:
    a = np.asarray(op.to_dense(), dtype=np.float64)
    scale = np.linalg.norm(a)
    if np.linalg.norm(a - a.T) > sym_tol * max(scale, np.finfo(float).tiny):
        raise NonSymmetric("operator failed the symmetry check")
    return 0.5 * (a + a.T)


def dense_eigvals(op: SymmetricOperator, sym_tol: float = 1e-10) -> np.ndarray:
    """All eigenvalues, sorted by decreasing magnitude."""
    w = np.linalg.eigvalsh(_checked_dense(op, sym_tol))
    return w[_order_by_magnitude(w)]


def dense_eigs(op: SymmetricOperator, sym_tol: float = 1e-10):
    """Full eigendecomposition, eigenvalues sorted by decreasing magnitude.

    Returns
    -------
    (eigenvalues, eigenvectors) with ``eigenvectors[:, j]`` paired to
    ``eigenvalues[j]``.
    """
    w, v = np.linalg.eigh(_checked_dense(op, sym_tol))
    order = _order_by_magnitude(w)
    return w[order], v[:, order]


def _orthonormal_basis(y: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(y, mode="reduced")
    return q


def _sketch(op: SymmetricOperator, omega: np.ndarray, depth: int) -> np.ndarray:
    # A^{depth+1} omega, re-orthonormalised after every product
    y = op.apply(omega)
    for _ in range(depth):
        if not np.all(np.isfinite(y)):
            break
        y = op.apply(_orthonormal_basis(y))
    return y


def randomized_topk_abs_eigs(op: SymmetricOperator, cfg: RandEigConfig) -> np.ndarray:
    """Estimate the ``cfg.k`` eigenvalues of largest magnitude, signed.

    Uses ``(q + 3) * (k + p)`` operator-vector products.

    Raises
    ------
    DegenerateSketch
        The sketch is non-finite or vanishes although the operator does not,
        twice in a row.
    """
    n = op.dim
    cfg.validate(n)
    width = cfg.k + cfg.p
    depth = cfg.power_depth(n)

    for attempt in range(2):
        gen = (cfg.rng if attempt == 0 else cfg.rng.child(attempt)).generator()
        omega = gen.standard_normal((n, width))
        y = _sketch(op, omega, depth)
        if not np.all(np.isfinite(y)):
            continue
        if not np.any(y):
            # the operator may simply be zero
            probe = op.apply(gen.standard_normal(n))
            if not np.any(probe):
                return np.zeros(cfg.k)
            continue
        q = _orthonormal_basis(y)
        b = op.apply(q).T  # Q'A, using symmetry
        _, s_tilde = np.linalg.eigh(b @ b.T)
        s = b.T @ s_tilde
        a_s = op.apply(s)
        lam = np.zeros(width)
        for j in range(width):
            sj = s[:, j]
            norm_s = np.linalg.norm(sj)
            if norm_s < 1e-300:
                continue
            rayleigh = float(sj @ a_s[:, j])
            sign = -1.0 if rayleigh < 0 else 1.0
            lam[j] = sign * math.sqrt(np.linalg.norm(b.T @ (b @ sj)) / norm_s)
        order = _order_by_magnitude(lam)
        return lam[order[: cfg.k]]
    raise DegenerateSketch("random sketch degenerate after one retry")


def topk_abs_eigs(
    op: SymmetricOperator,
    k: int,
    backend: str = "auto",
    rand_cfg: RandEigConfig | None = None,
    dense_max_dim: int = DENSE_MAX_DIM,
) -> np.ndarray:
    """The k largest-magnitude eigenvalues through the selected backend.

    ``backend`` is ``"dense"``, ``"randomized"`` or ``"auto"`` (dense up to
    ``dense_max_dim``).
    """
    if backend not in ("auto", "dense", "randomized"):
        raise PanelValueError(f"unknown eigen backend {backend!r}")
    k = int(k)
    if not 1 <= k <= op.dim:
        raise PanelValueError(f"k={k} outside 1..{op.dim}")
    if backend == "auto":
        backend = "dense" if op.dim <= dense_max_dim else "randomized"
    if backend == "randomized":
        cfg = rand_cfg or RandEigConfig(k)
        p = min(cfg.p, op.dim - k)
        if p >= 1:
            cfg = RandEigConfig(k, p, cfg.q, cfg.rng)
            return randomized_topk_abs_eigs(op, cfg)
        # sketch would be the whole space; the dense route is exact and cheaper
    return dense_eigvals(op)[:k]
