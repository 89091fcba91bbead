"""Least-squares prediction of the sink sensor with AIC-driven elimination."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as spla

from .errors import ContractError, ParseError, UnderdeterminedError

PIVOT_RTOL = 1e-10


@dataclass(frozen=True)
class LinearModel:
    attribute_ids: tuple[int, ...]
    coefficients: tuple[float, ...]
    intercept: float
    aic: float
    n_train: int
    build_time: float = 0.0
    rss: float = 0.0
    target_id: int | None = None

    def __post_init__(self):
        if len(self.coefficients) != len(self.attribute_ids):
            raise ContractError("one coefficient per attribute required")
        if not all(math.isfinite(c) for c in self.coefficients) or not math.isfinite(self.intercept):
            raise ContractError("model parameters must be finite")

    @property
    def n_params(self) -> int:
        return len(self.attribute_ids) + 1


def _design(matrix, features: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    features = [int(f) for f in features]
    if matrix.target_id in features:
        raise ContractError(f"features include the target {matrix.target_id}")
    if len(set(features)) != len(features):
        raise ContractError("duplicate feature ids")
    X = matrix.columns(features)
    y = matrix.target
    return X, y


def min_norm_lstsq(A: np.ndarray, b: np.ndarray, rtol: float = PIVOT_RTOL) -> np.ndarray:
    """Minimum-norm least-squares solution of ``A x ~ b``.

    Uses a column-pivoted QR factorisation; columns whose pivot falls below
    ``rtol * |R[0, 0]|`` are treated as dependent, and the remaining
    trapezoidal factor is reduced by a second QR (complete orthogonal
    decomposition) so the returned solution has minimum Euclidean norm.
    """
    m, p = A.shape
    if p == 0:
        return np.zeros(0)
    Q, R, perm = spla.qr(A, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros(p)
    rank = int(np.sum(diag > rtol * diag[0]))
    qtb = Q[:, :rank].T @ b
    T = R[:rank, :]
    if rank == p:
        z = spla.solve_triangular(T, qtb)
    else:
        Z, L = spla.qr(T.T, mode="economic")
        w = spla.solve_triangular(L.T, qtb, lower=True)
        z = Z @ w
    x = np.empty(p)
    x[perm] = z
    return x


def aic_of(rss: float, n: int, p: int) -> float:
    """Least-squares Akaike score ``n ln(rss / n) + 2 p``.

    `p` counts the intercept. A perfect fit returns ``-inf``.
    """
    if p < 1 or n <= p:
        raise ContractError(f"aic needs n > p >= 1 (n={n}, p={p})")
    if rss < 0:
        raise ContractError("rss must be non-negative")
    if rss == 0.0:
        return -math.inf
    return n * math.log(rss / n) + 2 * p


def _fit(X: np.ndarray, y: np.ndarray, features, *, allow_underdetermined=False):
    n, k = X.shape
    if n < k + 2:
        if not allow_underdetermined or n < 2:
            raise UnderdeterminedError(
                f"{n} rows cannot fit {k} attributes plus intercept (need {k + 2})")
    x_mean = X.mean(axis=0) if k else np.zeros(0)
    y_mean = float(y.mean())
    yc = y - y_mean
    if k:
        beta = min_norm_lstsq(X - x_mean, yc)
    else:
        beta = np.zeros(0)
    intercept = y_mean - float(x_mean @ beta)
    resid = y - intercept - X @ beta
    rss = float(resid @ resid)
    p = k + 1
    aic = aic_of(rss, n, p) if n > p else math.nan
    return beta, intercept, rss, aic


def fit_ols(matrix, features: Sequence[int], *, allow_underdetermined: bool = False) -> LinearModel:
    """Ordinary least squares of the target column on `features`.

    With `allow_underdetermined`, designs with fewer than ``len(features) + 2``
    rows are solved by the minimum-norm solution instead of raising; the
    resulting model has ``aic = nan``.
    """
    features = tuple(int(f) for f in features)
    X, y = _design(matrix, features)
    t0 = time.perf_counter()
    beta, intercept, rss, aic = _fit(X, y, features, allow_underdetermined=allow_underdetermined)
    elapsed = time.perf_counter() - t0
    return LinearModel(attribute_ids=features, coefficients=tuple(float(b) for b in beta),
                       intercept=float(intercept), aic=aic, n_train=len(y),
                       build_time=elapsed, rss=rss, target_id=matrix.target_id)


def stepwise_eliminate(matrix, features: Sequence[int], *, allow_underdetermined: bool = False) -> LinearModel:
    """Backward elimination by smallest standardized coefficient.

    At each step the attribute with the smallest ``|coef * sd(feature)|`` is
    dropped tentatively; the removal is kept only if the AIC strictly
    decreases. Elimination stops at the first non-improving removal or when a
    single attribute remains.

    Underdetermined designs (only with `allow_underdetermined`) have no
    defined AIC, so they are fitted once by minimum-norm least squares with
    no elimination.
    """
    t0 = time.perf_counter()
    current = tuple(sorted(int(f) for f in features))
    X_all, y = _design(matrix, current)
    n = len(y)
    col = {f: j for j, f in enumerate(current)}
    sd = X_all.std(axis=0, ddof=1) if current else np.zeros(0)
    sd_of = {f: float(sd[col[f]]) for f in current}

    def fit(ids):
        X = X_all[:, [col[f] for f in ids]]
        return _fit(X, y, ids, allow_underdetermined=allow_underdetermined)

    beta, intercept, rss, aic = fit(current)
    if not math.isnan(aic):
        while len(current) > 1:
            scores = [(abs(b * sd_of[f]), f) for f, b in zip(current, beta)]
            _, drop = min(scores)
            trial = tuple(f for f in current if f != drop)
            t_beta, t_int, t_rss, t_aic = fit(trial)
            if not t_aic < aic:
                break
            current, beta, intercept, rss, aic = trial, t_beta, t_int, t_rss, t_aic
    elapsed = time.perf_counter() - t0
    return LinearModel(attribute_ids=current, coefficients=tuple(float(b) for b in beta),
                       intercept=float(intercept), aic=aic, n_train=n,
                       build_time=elapsed, rss=rss, target_id=matrix.target_id)


def predict(model: LinearModel, row: Mapping[int, float]) -> float:
    total = model.intercept
    for sid, coef in zip(model.attribute_ids, model.coefficients):
        if sid not in row:
            raise ContractError(f"row is missing attribute {sid}")
        total += coef * float(row[sid])
    return total


def predict_matrix(model: LinearModel, matrix) -> np.ndarray:
    """Vectorised :func:`predict` over every row of a DataMatrix."""
    if not model.attribute_ids:
        return np.full(matrix.n_rows, model.intercept)
    X = matrix.columns(model.attribute_ids)
    return model.intercept + X @ np.asarray(model.coefficients)


def dumps_model(model: LinearModel) -> str:
    lines = [f"{model.target_id} {model.intercept!r} {model.aic!r} {model.n_train}"]
    lines += [f"{sid} {coef!r}" for sid, coef in zip(model.attribute_ids, model.coefficients)]
    return "\n".join(lines) + "\n"


def loads_model(text: str) -> LinearModel:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty model file")
    head = lines[0].split()
    if len(head) != 4:
        raise ParseError("header needs target_id intercept aic n_train", 1)
    try:
        target = None if head[0] == "None" else int(head[0])
        intercept, aic, n_train = float(head[1]), float(head[2]), int(head[3])
    except ValueError as exc:
        raise ParseError(str(exc), 1) from None
    ids, coefs = [], []
    for no, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 2:
            raise ParseError("expected 'sensor_id coefficient'", no)
        try:
            ids.append(int(parts[0]))
            coefs.append(float(parts[1]))
        except ValueError as exc:
            raise ParseError(str(exc), no) from None
    return LinearModel(attribute_ids=tuple(ids), coefficients=tuple(coefs), intercept=intercept,
                       aic=aic, n_train=n_train, target_id=target)
