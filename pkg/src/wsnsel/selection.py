"""Correlation-based feature-subset selection (CFS).

A subset is scored by how strongly its members correlate with the target
and how weakly they correlate with each other::

    merit = k * mean|r_cf| / sqrt(k + k (k - 1) * mean|r_ff|)

The subset search is best-first over single-feature additions with a stall
limit, followed by a pass that re-admits locally predictive features.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ContractError
from .stats import CorrelationMatrix


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[int, ...]
    merit: float
    trace: list[tuple[tuple[int, ...], float]] = field(default_factory=list)
    evaluations: int = 0
    degenerate: bool = False


def merit_of(subset: Iterable[int], corr: CorrelationMatrix, target: int) -> float:
    """CFS merit of `subset` for predicting `target`."""
    ids = sorted(set(subset))
    if not ids:
        raise ContractError("merit_of needs a non-empty subset")
    if target in ids:
        raise ContractError(f"subset contains the target {target}")
    r = np.abs(corr.r)
    t = corr.index(target)
    idx = [corr.index(i) for i in ids]
    k = len(idx)
    if k == 1:
        return float(r[idx[0], t])
    sum_cf = float(np.sum(r[idx, t]))
    sub = r[np.ix_(idx, idx)]
    sum_ff = float(np.sum(np.triu(sub, 1)))
    mean_cf = sum_cf / k
    mean_ff = sum_ff / (k * (k - 1) / 2)
    denom = math.sqrt(k + k * (k - 1) * mean_ff)
    return k * mean_cf / denom


TIE_RTOL = 1e-12


def _rank_key(subset: tuple[int, ...], merit: float):
    # higher merit first, then lower ids, then fewer features
    return (-merit, subset, len(subset))


def best_first_select(corr: CorrelationMatrix, target: int, stall_limit: int = 5) -> SelectionResult:
    """Best-first forward search over feature subsets.

    The open list is ordered by merit. Each expansion adds one feature to the
    best open subset; the search stops after `stall_limit` consecutive
    expansions that do not raise the best merit, or when the open list is
    exhausted.
    """
    if stall_limit < 1:
        raise ContractError("stall_limit must be >= 1")
    if target not in corr:
        raise ContractError(f"target {target} not in correlation matrix")
    features = sorted(i for i in corr.ids if i != target)
    if len(features) < 2:
        raise ContractError("need at least 2 candidate features besides the target")

    t = corr.index(target)
    r_cf = {f: abs(float(corr.r[corr.index(f), t])) for f in features}
    if all(v == 0.0 for v in r_cf.values()):
        top = max(features, key=lambda f: (r_cf[f], -f))
        return SelectionResult(selected=(top,), merit=r_cf[top],
                               trace=[((top,), r_cf[top])], evaluations=0,
                               degenerate=True)

    open_list: list = []
    visited: set[tuple[int, ...]] = set()
    trace: list[tuple[tuple[int, ...], float]] = []
    evaluations = 0
    best: tuple[int, ...] | None = None
    best_merit = 0.0
    stall = 0

    heapq.heappush(open_list, ((0.0, (), 0), (), 0.0))
    while open_list:
        _, subset, merit = heapq.heappop(open_list)
        if subset:
            trace.append((subset, merit))
        improved = False
        members = set(subset)
        for f in features:
            if f in members:
                continue
            child = tuple(sorted(members | {f}))
            if child in visited:
                continue
            visited.add(child)
            m = merit_of(child, corr, target)
            evaluations += 1
            heapq.heappush(open_list, (_rank_key(child, m), child, m))
            tol = TIE_RTOL * max(1.0, abs(best_merit)) if best is not None else 0.0
            if best is None or m > best_merit + tol:
                improved = True
                best, best_merit = child, m
            elif m >= best_merit - tol and (child, len(child)) < (best, len(best)):
                # numerical tie: lower ids, then the smaller subset, win
                best, best_merit = child, m
        stall = 0 if improved else stall + 1
        if stall >= stall_limit:
            break

    return SelectionResult(selected=best, merit=best_merit, trace=trace,
                           evaluations=evaluations)


def locally_predictive_pass(result: SelectionResult, corr: CorrelationMatrix, target: int) -> SelectionResult:
    """Re-admit features that are locally predictive.

    Excluded features are scanned in descending order of target correlation.
    A feature joins when no already-selected feature correlates with it more
    strongly than it correlates with the target. Sweeps repeat until stable.
    Features with zero target correlation are never added.
    """
    selected = set(result.selected)
    t = corr.index(target)

    def r_cf(f):
        return abs(float(corr.r[corr.index(f), t]))

    trace = list(result.trace)
    changed = True
    while changed:
        changed = False
        excluded = [f for f in corr.ids if f != target and f not in selected]
        excluded.sort(key=lambda f: (-r_cf(f), f))
        for f in excluded:
            rf = r_cf(f)
            if rf == 0.0:
                continue
            fi = corr.index(f)
            if any(abs(float(corr.r[corr.index(s), fi])) > rf for s in selected):
                continue
            selected.add(f)
            changed = True
            subset = tuple(sorted(selected))
            trace.append((subset, merit_of(subset, corr, target)))

    final = tuple(sorted(selected))
    if final == tuple(result.selected):
        return result
    return SelectionResult(selected=final, merit=merit_of(final, corr, target),
                           trace=trace, evaluations=result.evaluations,
                           degenerate=result.degenerate)


def select_sensors(corr: CorrelationMatrix, target: int, stall_limit: int = 5) -> SelectionResult:
    """Best-first search followed by the locally-predictive pass."""
    return locally_predictive_pass(best_first_select(corr, target, stall_limit), corr, target)
