"""Numeric primitives shared by selection and regression.

Sample (n - 1) variance is used throughout. A constant vector carries no
linear information, so its correlation with anything is defined as 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractError, DimensionError


def _as_vector(x, name="x"):
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {v.shape}")
    if v.size < 2:
        raise DimensionError(f"{name} needs at least 2 values, got {v.size}")
    return v


def _is_constant(v: np.ndarray) -> bool:
    return bool(np.ptp(v) == 0.0)


def pearson(x, y) -> float:
    """Product-moment correlation of two equal-length vectors.

    Returns exactly 0.0 when either vector is constant.
    """
    x = _as_vector(x, "x")
    y = _as_vector(y, "y")
    if x.size != y.size:
        raise DimensionError(f"length mismatch: {x.size} vs {y.size}")
    if _is_constant(x) or _is_constant(y):
        return 0.0
    dx = x - x.mean()
    dy = y - y.mean()
    denom = np.sqrt(np.dot(dx, dx) * np.dot(dy, dy))
    if denom == 0.0:
        return 0.0
    r = float(np.dot(dx, dy) / denom)
    return min(1.0, max(-1.0, r))


def standardize(x) -> np.ndarray:
    """Center to mean 0 and scale to unit sample standard deviation."""
    v = _as_vector(x)
    if _is_constant(v):
        return np.zeros_like(v)
    d = v - v.mean()
    sd = d.std(ddof=1)
    if sd == 0.0:
        # spread below floating-point resolution
        return np.zeros_like(v)
    return d / sd


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric matrix of Pearson coefficients keyed by column id."""

    ids: tuple[int, ...]
    r: np.ndarray

    def __post_init__(self):
        n = len(self.ids)
        if self.r.shape != (n, n):
            raise DimensionError(f"r has shape {self.r.shape}, expected {(n, n)}")
        if len(set(self.ids)) != n:
            raise ContractError("duplicate ids in correlation matrix")
        object.__setattr__(self, "_index", {cid: i for i, cid in enumerate(self.ids)})
        self.r.setflags(write=False)

    def index(self, cid: int) -> int:
        try:
            return self._index[cid]
        except KeyError:
            raise ContractError(f"id {cid} not in correlation matrix") from None

    def get(self, a: int, b: int) -> float:
        return float(self.r[self.index(a), self.index(b)])

    def __contains__(self, cid) -> bool:
        return cid in self._index


def correlation_matrix(matrix) -> CorrelationMatrix:
    """Pairwise Pearson coefficients for every column of a DataMatrix.

    `matrix` may also be a ``(values, ids)`` pair of a 2-D array and its
    column ids.
    """
    if isinstance(matrix, tuple):
        values, ids = matrix
    else:
        values, ids = matrix.values, matrix.sensor_ids
    values = np.asarray(values, dtype=float)
    ids = tuple(int(i) for i in ids)
    if values.ndim != 2 or values.shape[1] < 2:
        raise DimensionError("need a 2-D matrix with at least 2 columns")
    if values.shape[0] < 2:
        raise DimensionError("need at least 2 rows")
    if values.shape[1] != len(ids):
        raise DimensionError("column count does not match ids")

    centered = values - values.mean(axis=0)
    ss = np.einsum("ij,ij->j", centered, centered)
    constant = (np.ptp(values, axis=0) == 0.0) | (ss == 0.0)
    ss[constant] = 1.0
    r = (centered.T @ centered) / np.sqrt(np.outer(ss, ss))
    np.clip(r, -1.0, 1.0, out=r)
    r[constant, :] = 0.0
    r[:, constant] = 0.0
    # enforce exact symmetry and unit diagonal
    r = np.triu(r, 1)
    r = r + r.T
    np.fill_diagonal(r, np.where(constant, 0.0, 1.0))
    return CorrelationMatrix(ids=ids, r=r)


def sample_std(x: Sequence[float]) -> float:
    v = _as_vector(x)
    return float(v.std(ddof=1))
