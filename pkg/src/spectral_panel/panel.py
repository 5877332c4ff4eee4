"""Balanced panel container, CSV interchange and shared numeric helpers."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateConflict,
    MissingCell,
    NonFiniteValue,
    PanelValueError,
    SchemaMismatch,
)

__all__ = [
    "BalancedPanel",
    "GroupAssignment",
    "DgpParams",
    "RngSpec",
    "PanelSchema",
    "load_panel_csv",
    "read_panel_csv",
    "write_panel_csv",
    "panel_to_csv",
    "residuals",
    "sample_truncated_normal",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BalancedPanel:
    """Outcomes ``y`` (N x T) and covariates ``x`` (N x T x d) on a complete grid.

    ``unit_ids`` and ``period_ids`` default to ``0..N-1`` and ``0..T-1``.
    Arrays are copied and made read-only on construction.
    """

    y: np.ndarray
    x: np.ndarray
    unit_ids: tuple = ()
    period_ids: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.float64)
        if y.ndim != 2:
            raise DimensionMismatch(f"y must be N x T, got shape {y.shape}")
        if x.ndim == 2 and x.shape == y.shape:
            x = x[:, :, None]
        if x.ndim != 3 or x.shape[:2] != y.shape:
            raise DimensionMismatch(
                f"x must be N x T x d with N x T = {y.shape}, got shape {x.shape}"
            )
        n, t = y.shape
        if n < 1 or t < 1:
            raise DimensionMismatch("panel needs at least one unit and one period")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
            raise NonFiniteValue("panel contains non-finite values")
        unit_ids = tuple(self.unit_ids) if len(self.unit_ids) else tuple(range(n))
        period_ids = tuple(self.period_ids) if len(self.period_ids) else tuple(range(t))
        if len(unit_ids) != n or len(period_ids) != t:
            raise DimensionMismatch("id lengths do not match the data shape")
        if len(set(unit_ids)) != n:
            raise PanelValueError("unit_ids must be distinct")
        if any(not _lt(a, b) for a, b in zip(period_ids[:-1], period_ids[1:])):
            raise PanelValueError("period_ids must be strictly increasing")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "unit_ids", unit_ids)
        object.__setattr__(self, "period_ids", period_ids)

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def n_covariates(self) -> int:
        return self.x.shape[2]

    def subset(self, units) -> "BalancedPanel":
        """Panel restricted to the given unit indices (in the given order)."""
        units = np.asarray(units, dtype=np.intp)
        return BalancedPanel(
            self.y[units],
            self.x[units],
            tuple(self.unit_ids[i] for i in units),
            self.period_ids,
        )


def _lt(a, b) -> bool:
    try:
        return a < b
    except TypeError:
        return str(a) < str(b)


@dataclass(frozen=True)
class GroupAssignment:
    """Group labels in ``1..n_groups``."""

    labels: np.ndarray
    n_groups: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise PanelValueError("labels must be a vector")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise PanelValueError("labels must be integers")
        labels = labels.astype(np.int64)
        if self.n_groups < 1:
            raise PanelValueError("n_groups must be positive")
        if labels.size and (labels.min() < 1 or labels.max() > self.n_groups):
            raise PanelValueError(f"labels must lie in 1..{self.n_groups}")
        labels = labels.copy()
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels) -> "GroupAssignment":
        """Relabel arbitrary hashable labels to ``1..G`` in order of first appearance."""
        mapping: dict = {}
        dense = [mapping.setdefault(lab, len(mapping) + 1) for lab in labels]
        return cls(np.asarray(dense, dtype=np.int64), max(len(mapping), 1))

    @property
    def n_units(self) -> int:
        return self.labels.size

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_groups + 1)[1:]

    def all_nonempty(self) -> bool:
        return bool(np.all(self.sizes() > 0))


@dataclass(frozen=True)
class DgpParams:
    """True parameters behind a simulated panel.

    ``alpha`` is M x G x T with ``alpha[0]`` the outcome's group-time effects,
    ``rho`` is N x M x d. ``theta`` is set only for dynamic designs.
    """

    beta: np.ndarray
    alpha: np.ndarray
    rho: np.ndarray
    sigma2: float
    trunc: float
    theta: float | None = None

    def __post_init__(self):
        if self.theta is not None and not abs(self.theta) < 1:
            raise PanelValueError("|theta| must be < 1")
        if self.sigma2 <= 0 or self.trunc <= 0:
            raise PanelValueError("sigma2 and trunc must be positive")


@dataclass(frozen=True)
class RngSpec:
    """Counter-based random stream identified by ``(seed, stream, path)``.

    Each spec maps to an independent Philox stream through
    :class:`numpy.random.SeedSequence`, so draws depend only on the spec and
    never on call order or threading. ``child`` derives nested substreams.
    """

    seed: int
    stream: int = 0
    path: tuple = field(default=())

    def __post_init__(self):
        if self.stream < 0 or any(p < 0 for p in self.path):
            raise PanelValueError("stream indices must be nonnegative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(
            entropy=int(self.seed) % 2**64, spawn_key=(int(self.stream), *self.path)
        )
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "RngSpec":
        return RngSpec(self.seed, self.stream, (*self.path, int(index)))

    def with_stream(self, stream: int) -> "RngSpec":
        return RngSpec(self.seed, int(stream), ())


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngSpec or numpy Generator, got {type(rng).__name__}")


# -- CSV interchange --------------------------------------------------------


@dataclass(frozen=True)
class PanelSchema:
    """Column mapping for long-format panel CSV files.

    With ``x=None`` every column other than unit, time and y is a covariate,
    in header order.
    """

    unit: str = "unit"
    time: str = "time"
    y: str = "y"
    x: tuple[str, ...] | None = None


def _parse_float(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise NonFiniteValue(f"{where}: cannot parse {text!r} as a number") from exc
    if not math.isfinite(value):
        raise NonFiniteValue(f"{where}: non-finite value {text!r}")
    return value


def _period_sort_key(labels: Sequence[str]):
    try:
        nums = [float(lab) for lab in labels]
    except ValueError:
        return sorted(labels), False
    order = sorted(range(len(labels)), key=lambda k: nums[k])
    return [labels[k] for k in order], True


def read_panel_csv(stream, schema: PanelSchema | None = None) -> BalancedPanel:
    schema = schema or PanelSchema()
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaMismatch("empty file") from None
    for col in (schema.unit, schema.time, schema.y):
        if col not in header:
            raise SchemaMismatch(f"missing column {col!r}; header is {header}")
    if schema.x is None:
        xcols = [h for h in header if h not in (schema.unit, schema.time, schema.y)]
    else:
        xcols = list(schema.x)
        missing = [c for c in xcols if c not in header]
        if missing:
            raise SchemaMismatch(f"missing covariate columns {missing}")
    iu, it, iy = header.index(schema.unit), header.index(schema.time), header.index(schema.y)
    ix = [header.index(c) for c in xcols]

    rows: dict[tuple[str, str], tuple[str, ...]] = {}
    units: dict[str, int] = {}
    periods: set[str] = set()
    for lineno, raw in enumerate(reader, start=2):
        if not raw or all(not f.strip() for f in raw):
            continue
        if len(raw) != len(header):
            raise SchemaMismatch(f"line {lineno}: expected {len(header)} fields, got {len(raw)}")
        key = (raw[iu], raw[it])
        if key in rows:
            if rows[key] != tuple(raw):
                raise DuplicateConflict(f"line {lineno}: conflicting duplicate for {key}")
            continue
        rows[key] = tuple(raw)
        units.setdefault(raw[iu], len(units))
        periods.add(raw[it])

    if not rows:
        raise SchemaMismatch("no data rows")
    period_labels, numeric = _period_sort_key(sorted(periods))
    tindex = {p: k for k, p in enumerate(period_labels)}
    n, t, d = len(units), len(period_labels), len(xcols)
    if len(rows) != n * t:
        for u in units:
            for p in period_labels:
                if (u, p) not in rows:
                    raise MissingCell(f"unit {u!r} has no row for period {p!r}")
    y = np.empty((n, t))
    x = np.empty((n, t, d))
    for (u, p), raw in rows.items():
        i, s = units[u], tindex[p]
        where = f"unit {u!r}, period {p!r}"
        y[i, s] = _parse_float(raw[iy], where)
        for k, col in enumerate(ix):
            x[i, s, k] = _parse_float(raw[col], where)
    period_ids = tuple(period_labels)
    if numeric:
        # keep labels as text but order them numerically
        period_ids = tuple(_NumericLabel(p) for p in period_labels)
    return BalancedPanel(y, x, tuple(units), period_ids)


class _NumericLabel(str):
    """String label that compares by its numeric value."""

    def __lt__(self, other):
        return float(self) < float(other)


def load_panel_csv(path, schema: PanelSchema | None = None) -> BalancedPanel:
    """Read a long-format CSV (``unit,time,y,x1..xd``) into a validated panel.

    Rows may come in any order. Repeated ``(unit, time)`` rows are dropped only
    when every field is identical.

    Raises
    ------
    SchemaMismatch, MissingCell, NonFiniteValue, DuplicateConflict
    """
    with open(Path(path), newline="", encoding="utf-8") as fh:
        return read_panel_csv(fh, schema)


def panel_to_csv(panel: BalancedPanel, xnames: Sequence[str] | None = None) -> str:
    d = panel.n_covariates
    xnames = list(xnames) if xnames is not None else [f"x{k + 1}" for k in range(d)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["unit", "time", "y", *xnames])
    for i, u in enumerate(panel.unit_ids):
        for s, p in enumerate(panel.period_ids):
            w.writerow([u, p, repr(float(panel.y[i, s])), *(repr(float(v)) for v in panel.x[i, s])])
    return buf.getvalue()


def write_panel_csv(panel: BalancedPanel, path, xnames: Sequence[str] | None = None) -> None:
    Path(path).write_text(panel_to_csv(panel, xnames), encoding="utf-8")


# -- numerics ---------------------------------------------------------------


def residuals(panel: BalancedPanel, b) -> np.ndarray:
    """``r[i, t] = y[i, t] - x[i, t, :] @ b``."""
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if b.size != panel.n_covariates:
        raise DimensionMismatch(f"b has length {b.size}, panel has d={panel.n_covariates}")
    if b.size == 0:
        return panel.y.copy()
    return panel.y - panel.x @ b


def sample_truncated_normal(rng, sigma2: float, trunc: float, shape) -> np.ndarray:
    """Draw ``Z * 1{|Z| <= trunc * sqrt(sigma2)}`` with ``Z ~ N(0, sigma2)``.

    Out-of-band draws are set to zero, not redrawn.
    """
    if not sigma2 > 0 or not trunc > 0:
        raise PanelValueError("sigma2 and trunc must be positive")
    z = as_generator(rng).standard_normal(shape)
    sd = math.sqrt(sigma2)
    z *= sd
    z[np.abs(z) > trunc * sd] = 0.0
    return z
