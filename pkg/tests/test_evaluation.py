import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wsnsel.errors import ContractError, FoldTooSmallError
from wsnsel.evaluation import auto_k, cross_validate, make_folds, rmse, run_scenario

from conftest import make_matrix


def test_contiguous_folds():
    plan = make_folds(4, 2, "contiguous")
    assert plan.test_rows(0).tolist() == [0, 1]
    assert plan.test_rows(1).tolist() == [2, 3]


def test_fold_sizes_balanced():
    plan = make_folds(10, 3, "contiguous")
    assert sorted(plan.sizes().tolist(), reverse=True) == [4, 3, 3]


def test_stratified_fold_means():
    targets = np.arange(1, 101, dtype=float)
    plan = make_folds(100, 10, "target_stratified", targets=targets)
    overall = targets.mean()
    for f in range(10):
        fold_mean = targets[plan.test_rows(f)].mean()
        assert abs(fold_mean - overall) <= 0.1 * overall


def test_fold_contract():
    with pytest.raises(ContractError):
        make_folds(5, 1, "contiguous")
    with pytest.raises(ContractError):
        make_folds(5, 6, "contiguous")
    with pytest.raises(ContractError):
        make_folds(5, 2, "target_stratified")


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 300).flatmap(lambda n: st.tuples(st.just(n), st.integers(2, n))),
       st.sampled_from(["contiguous", "shuffled", "target_stratified"]), st.integers(0, 2**31))
def test_fold_partition(nk, scheme, seed):
    n, k = nk
    targets = np.random.default_rng(seed).normal(size=n)
    plan = make_folds(n, k, scheme, seed, targets=targets)
    rows = np.concatenate([plan.test_rows(f) for f in range(k)])
    assert sorted(rows.tolist()) == list(range(n))
    sizes = plan.sizes()
    assert sizes.max() - sizes.min() <= 1
    again = make_folds(n, k, scheme, seed, targets=targets)
    assert again.assignments.tobytes() == plan.assignments.tobytes()


def test_rmse_examples():
    a = np.array([3.0, 5.0])
    assert rmse(a, a).absolute == 0.0 and rmse(a, a).percent == 0.0
    assert rmse([1.0, 3.0], [1.0, 1.0]).absolute == pytest.approx(math.sqrt(2), abs=1e-15)
    r = rmse(a + 0.25, a)
    assert r.absolute == pytest.approx(0.25, abs=1e-15)
    assert r.percent == pytest.approx(100 * 0.25 / 4.0)
    assert rmse([1.0, -1.0], [1.0, -1.0]).percent is None
    with pytest.raises(ContractError):
        rmse([1.0], [1.0, 2.0])


def test_cv_exact_linear_data(rng):
    X = rng.normal(size=(40, 3))
    m = make_matrix(X, X @ [1.0, -2.0, 0.5] + 3.0)
    for scheme in ("contiguous", "shuffled", "target_stratified"):
        plan = make_folds(40, 5, scheme, 7, targets=m.target)
        assert cross_validate(m, [1, 2, 3], plan).pooled.absolute < 1e-10


def _loo_single_feature(x, y):
    preds = []
    for i in range(len(y)):
        mask = np.arange(len(y)) != i
        xs, ys = x[mask], y[mask]
        slope = np.sum((xs - xs.mean()) * (ys - ys.mean())) / np.sum((xs - xs.mean()) ** 2)
        preds.append(ys.mean() + slope * (x[i] - xs.mean()))
    return math.sqrt(np.mean((np.asarray(preds) - y) ** 2))


def test_leave_one_out_matches_oracle(rng):
    x = rng.normal(size=10)
    y = 1.7 * x + rng.normal(scale=0.3, size=10)
    m = make_matrix(x[:, None], y)
    plan = make_folds(10, 10, "contiguous")
    got = cross_validate(m, [1], plan).pooled.absolute
    assert got == pytest.approx(_loo_single_feature(x, y), abs=1e-10)


def test_cv_deterministic(rng):
    X = rng.normal(size=(60, 4))
    m = make_matrix(X, X @ [1, 0, 2, 0] + rng.normal(size=60))
    plan = make_folds(60, 5, "shuffled", 42)
    a = cross_validate(m, [1, 2, 3, 4], plan)
    b = cross_validate(m, [1, 2, 3, 4], make_folds(60, 5, "shuffled", 42))
    assert [r.absolute for r in a.per_fold] == [r.absolute for r in b.per_fold]
    assert a.pooled == b.pooled


def test_fold_too_small(rng):
    X = rng.normal(size=(8, 5))
    m = make_matrix(X, X.sum(axis=1))
    with pytest.raises(FoldTooSmallError, match="larger k"):
        cross_validate(m, [1, 2, 3, 4, 5], make_folds(8, 2, "contiguous"))


def test_auto_k():
    assert [auto_k(n) for n in (35, 99, 100, 2700, 2999, 3000, 5400)] == [2, 2, 5, 5, 5, 10, 10]


def _field_matrix(rng, n=120, n_sensors=8):
    t = np.arange(n)
    base = 20 + np.sin(2 * np.pi * t / 50)
    cols = [base + rng.normal(scale=0.05 + 0.2 * i, size=n) for i in range(n_sensors)]
    y = base + rng.normal(scale=0.05, size=n)
    return make_matrix(np.column_stack(cols), y)


def test_run_scenario_both_arms(rng):
    m = _field_matrix(rng)
    rep = run_scenario(m, None, True, timing=True)
    assert rep.k == 5 and rep.n_sensors == 8 and rep.n_train == 120
    assert rep.selected_ids and len(rep.selected_ids) <= 8
    assert rep.ltef == Fraction(8, len(rep.selected_ids))
    assert rep.rmse_all.absolute > 0 and rep.rmse_selected.absolute > 0
    assert rep.build_time_all > 0 and rep.build_time_selected > 0
    assert any("optimistic" in n for n in rep.notes)


def test_run_scenario_without_selection(rng):
    rep = run_scenario(_field_matrix(rng), 3, False, timing=False)
    assert rep.selected_arm is None and rep.ltef is None
    assert rep.build_time_all is None and rep.rmse_all is not None


def test_run_scenario_underdetermined_baseline(rng):
    m = _field_matrix(rng, n=12, n_sensors=10)
    rep = run_scenario(m, 2, True, timing=False)
    assert rep.all_arm.underdetermined
    assert not rep.selected_arm.underdetermined or len(rep.selected_ids) + 2 > 6


def test_ltef_paper_values():
    from wsnsel.evaluation import ExperimentReport, ArmResult, Rmse
    for total, sel, expected in ((54, 2, 27), (53, 5, Fraction("10.6")), (53, 8, Fraction("6.625"))):
        arm = ArmResult(features=tuple(range(sel)), rmse=Rmse(0.0, 0.0), build_time=None)
        rep = ExperimentReport("x", total, 100, 5, selected_arm=arm)
        assert rep.ltef == expected
