"""k-fold cross-validation, RMSE and with/without-selection scenario runs."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ContractError, FoldTooSmallError
from .regression import stepwise_eliminate
from .selection import best_first_select, locally_predictive_pass
from .stats import correlation_matrix

SCHEMES = ("contiguous", "shuffled", "target_stratified")
OPTIMISM_NOTE = ("selection ran once on the full window, so the selection-arm "
                 "RMSE is optimistically biased")


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int = 0
    scheme: str = "target_stratified"

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


@dataclass(frozen=True)
class Rmse:
    absolute: float
    percent: float | None


@dataclass
class CVResult:
    pooled: Rmse
    per_fold: list[Rmse]
    mean_build_time: float
    predictions: np.ndarray


@dataclass
class ArmResult:
    features: tuple[int, ...]
    rmse: Rmse
    build_time: float | None
    per_fold: list[Rmse] = field(default_factory=list)
    underdetermined: bool = False


@dataclass
class ExperimentReport:
    scenario: str
    n_sensors: int
    n_train: int
    k: int
    all_arm: ArmResult | None = None
    selected_arm: ArmResult | None = None
    merit: float | None = None
    degenerate: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def selected_ids(self) -> tuple[int, ...]:
        return self.selected_arm.features if self.selected_arm else ()

    @property
    def ltef(self) -> Fraction | None:
        if self.selected_arm is None:
            return None
        from .sim import ltef
        return ltef(self.n_sensors, len(self.selected_arm.features))

    @property
    def rmse_all(self) -> Rmse | None:
        return self.all_arm.rmse if self.all_arm else None

    @property
    def rmse_selected(self) -> Rmse | None:
        return self.selected_arm.rmse if self.selected_arm else None

    @property
    def build_time_all(self) -> float | None:
        return self.all_arm.build_time if self.all_arm else None

    @property
    def build_time_selected(self) -> float | None:
        return self.selected_arm.build_time if self.selected_arm else None


def auto_k(n_rows: int) -> int:
    """Fold count that grows with the training window."""
    if n_rows < 100:
        return 2
    if n_rows < 3000:
        return 5
    return 10


def make_folds(n_rows: int, k: int, scheme: str = "target_stratified", seed: int = 0,
               targets: Sequence[float] | None = None) -> FoldPlan:
    """Balanced assignment of rows to `k` folds.

    ``contiguous`` splits rows in order, ``shuffled`` splits a seeded
    permutation, and ``target_stratified`` sorts rows by target value and
    deals them round-robin.
    """
    if scheme not in SCHEMES:
        raise ContractError(f"unknown fold scheme {scheme!r}")
    if not 2 <= k <= n_rows:
        raise ContractError(f"k={k} must satisfy 2 <= k <= {n_rows}")
    assignments = np.empty(n_rows, dtype=np.int64)
    if scheme == "target_stratified":
        if targets is None or len(targets) != n_rows:
            raise ContractError("target_stratified needs one target value per row")
        order = np.argsort(np.asarray(targets, dtype=float), kind="stable")
        assignments[order] = np.arange(n_rows) % k
    else:
        order = np.arange(n_rows)
        if scheme == "shuffled":
            order = np.random.default_rng(seed).permutation(n_rows)
        for fold, chunk in enumerate(np.array_split(order, k)):
            assignments[chunk] = fold
    assignments.setflags(write=False)
    return FoldPlan(k=k, assignments=assignments, seed=seed, scheme=scheme)


def rmse(predictions, actuals) -> Rmse:
    """Root mean squared error, also as a percentage of the mean actual."""
    p = np.asarray(predictions, dtype=float)
    a = np.asarray(actuals, dtype=float)
    if p.shape != a.shape or p.ndim != 1:
        raise ContractError(f"shape mismatch: {p.shape} vs {a.shape}")
    if p.size == 0:
        raise ContractError("rmse of empty vectors")
    err = p - a
    absolute = math.sqrt(float(err @ err) / err.size)
    mean = float(a.mean())
    percent = None if mean == 0.0 else 100.0 * absolute / abs(mean)
    return Rmse(absolute, percent)


def cross_validate(matrix, features: Sequence[int], plan: FoldPlan, *,
                   allow_underdetermined: bool = False) -> CVResult:
    """Train stepwise models on k-1 folds and predict the held-out fold.

    The pooled RMSE is computed over all held-out predictions in row order,
    so it does not depend on the order folds are visited.
    """
    if len(plan.assignments) != matrix.n_rows:
        raise ContractError(f"fold plan covers {len(plan.assignments)} rows, matrix has {matrix.n_rows}")
    features = tuple(features)
    predictions = np.empty(matrix.n_rows)
    per_fold, times = [], []
    for fold in range(plan.k):
        train_idx = plan.train_rows(fold)
        test_idx = plan.test_rows(fold)
        if len(train_idx) < len(features) + 2 and not allow_underdetermined:
            raise FoldTooSmallError(
                f"fold {fold} leaves {len(train_idx)} training rows for {len(features)} "
                f"features (need {len(features) + 2}); use a larger k or fewer features")
        model = stepwise_eliminate(matrix.rows(train_idx), features,
                                   allow_underdetermined=allow_underdetermined)
        x = matrix.columns(model.attribute_ids)[test_idx]
        pred = model.intercept + x @ np.asarray(model.coefficients, dtype=float)
        predictions[test_idx] = pred
        per_fold.append(rmse(pred, matrix.target[test_idx]))
        times.append(model.build_time)
    return CVResult(pooled=rmse(predictions, matrix.target), per_fold=per_fold,
                    mean_build_time=float(np.mean(times)), predictions=predictions)


def _timed_build(matrix, features, allow_underdetermined, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        stepwise_eliminate(matrix, features, allow_underdetermined=allow_underdetermined)
        best = min(best, time.perf_counter() - t0)
    return best


def _run_arm(matrix, features, plan, timing, repeats) -> ArmResult:
    n_train_min = int(min(len(plan.train_rows(f)) for f in range(plan.k)))
    under = n_train_min < len(features) + 2 or matrix.n_rows < len(features) + 2
    cv = cross_validate(matrix, features, plan, allow_underdetermined=under)
    build = _timed_build(matrix, features, under, repeats) if timing else None
    return ArmResult(features=tuple(features), rmse=cv.pooled, build_time=build,
                     per_fold=cv.per_fold, underdetermined=under)


def run_scenario(matrix, k: int | None = None, with_selection: bool = True, *,
                 name: str = "scenario", scheme: str = "target_stratified", seed: int = 0,
                 stall_limit: int = 5, baseline: bool = True, timing: bool = True,
                 timing_repeats: int = 3) -> ExperimentReport:
    """Evaluate the all-sensors arm and/or the selected-sensors arm.

    Both arms share one fold plan. Selection runs once on the whole window.
    Build time is the best of `timing_repeats` full-window stepwise fits.
    An arm whose training folds are too small for ordinary least squares is
    fitted by minimum-norm least squares without elimination and flagged.
    """
    if k is None:
        k = auto_k(matrix.n_rows)
    plan = make_folds(matrix.n_rows, k, scheme, seed, targets=matrix.target)
    report = ExperimentReport(scenario=name, n_sensors=len(matrix.features),
                              n_train=matrix.n_rows, k=k)
    if baseline or not with_selection:
        report.all_arm = _run_arm(matrix, matrix.features, plan, timing, timing_repeats)
        if report.all_arm.underdetermined:
            report.notes.append("all-sensors arm is underdetermined; minimum-norm fit, no elimination")
    if with_selection:
        corr = correlation_matrix(matrix)
        sel = locally_predictive_pass(best_first_select(corr, matrix.target_id, stall_limit),
                                      corr, matrix.target_id)
        report.merit = sel.merit
        report.degenerate = sel.degenerate
        report.selected_arm = _run_arm(matrix, sel.selected, plan, timing, timing_repeats)
        report.notes.append(OPTIMISM_NOTE)
    return report
