import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rib.evaluation import (
    CriticFitConfig,
    FcmiEstimate,
    RocCurve,
    achievable_region,
    auc_roc,
    convex_hull_curve,
    estimate_recognizability,
    fcmi_bound,
    gap_report,
    gaussian_roc,
    lemma1_numeric,
    per_index_mi,
    plugin_mi,
    polygon_area,
    recognizability,
    report_from_scores,
    roc_conditions_check,
    roc_curve,
    theorem1_gaussian_check,
)


def brute_auc(pos, neg):
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else 0.5 if p == q else 0.0
    return total / (len(pos) * len(neg))


score_lists = st.lists(st.integers(-5, 5).map(float), min_size=1, max_size=25)


# ---- AUC / ROC --------------------------------------------------------------


def test_auc_basic_cases():
    assert auc_roc([3, 4], [1, 2]) == 1.0
    assert auc_roc([1, 2], [3, 4]) == 0.0
    assert auc_roc([1, 1], [1, 1]) == 0.5
    assert auc_roc([1, 2, 3], [2]) == 0.5


def test_auc_rejects_empty():
    with pytest.raises(ValueError):
        auc_roc([], [1.0])


@settings(max_examples=200)
@given(score_lists, score_lists)
def test_auc_equals_pairwise_count(pos, neg):
    assert auc_roc(pos, neg) == brute_auc(pos, neg)


@settings(max_examples=100)
@given(score_lists, score_lists)
def test_recognizability_in_unit_interval_and_symmetric(pos, neg):
    r = recognizability(pos, neg)
    assert 0.0 <= r <= 1.0
    assert r == pytest.approx(recognizability(neg, pos), abs=1e-15)


@settings(max_examples=100)
@given(score_lists, score_lists)
def test_roc_trapezoid_area_equals_auc(pos, neg):
    curve = roc_curve(pos, neg)
    assert curve.area() == pytest.approx(auc_roc(pos, neg), abs=1e-12)
    assert tuple(curve.points[0]) == (0.0, 0.0) and tuple(curve.points[-1]) == (1.0, 1.0)
    assert np.all(np.diff(curve.fpr) >= 0) and np.all(np.diff(curve.tpr) >= 0)


@settings(max_examples=100)
@given(score_lists, score_lists)
def test_achievable_region_area_is_recognizability(pos, neg):
    curve = roc_curve(pos, neg)
    area = polygon_area(achievable_region(curve))
    assert area == pytest.approx(abs(2 * auc_roc(pos, neg) - 1), abs=1e-12)


def test_achievable_region_vertices():
    curve = RocCurve(np.array([0, 0, 1.0]), np.array([0, 1, 1.0]), np.array([1.0, 0.0]))
    region = achievable_region(curve)
    np.testing.assert_array_equal(region, [[0, 0], [0, 1], [1, 1], [1, 0]])
    assert polygon_area(region) == 1.0


def test_polygon_area_unit_square_and_triangle():
    assert polygon_area([[0, 0], [1, 0], [1, 1], [0, 1]]) == 1.0
    assert polygon_area([[0, 0], [2, 0], [0, 3]]) == 3.0


def test_convex_hull_removes_dent():
    curve = RocCurve(
        np.array([0, 0.2, 0.5, 1.0]), np.array([0, 0.6, 0.65, 1.0]), np.zeros(3)
    )
    hull = convex_hull_curve(curve)
    np.testing.assert_array_equal(hull.points, [[0, 0], [0.2, 0.6], [1, 1]])
    assert roc_conditions_check(curve).passed
    assert not roc_conditions_check(curve, use_hull=False).c3_ok


# ---- plug-in MI ---------------------------------------------------------------


def test_plugin_mi_exact_table():
    # joint table [[3, 1], [1, 3]] / 8; reference from 30-digit arithmetic
    symbols = np.array([0, 0, 0, 1, 0, 1, 1, 1])
    u = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    assert plugin_mi(symbols, u) == pytest.approx(0.130812035941136959, abs=1e-12)


def test_plugin_mi_hand_table_three_symbols():
    symbols = np.array(["a", "b", "c", "a", "a", "c"])
    u = np.array([0, 0, 0, 1, 1, 1])
    expected = 0.0
    counts = {("a", 0): 1, ("b", 0): 1, ("c", 0): 1, ("a", 1): 2, ("c", 1): 1}
    ps = {"a": 3 / 6, "b": 1 / 6, "c": 2 / 6}
    for (s, b), c in counts.items():
        p = c / 6
        expected += p * math.log(p / (ps[s] * 0.5))
    assert plugin_mi(symbols, u) == pytest.approx(expected, abs=1e-12)


def test_plugin_mi_bounds():
    u = np.array([0, 1, 0, 1, 1, 0])
    assert plugin_mi(u, u) == pytest.approx(math.log(2), abs=1e-15)
    assert plugin_mi(np.zeros(6), u) == 0.0
    with pytest.raises(ValueError):
        plugin_mi([], [])
    with pytest.raises(ValueError):
        plugin_mi([1, 2], [0])


def test_composite_symbols_use_rows():
    sym = np.array([[0, 1], [1, 0], [0, 1], [1, 0]])
    u = np.array([0, 1, 0, 1])
    assert plugin_mi(sym, u) == pytest.approx(math.log(2), abs=1e-15)


@settings(max_examples=50)
@given(st.integers(2, 40), st.integers(0, 2**32 - 1))
def test_plugin_mi_range(m, seed):
    rng = np.random.default_rng(seed)
    mi = plugin_mi(rng.integers(0, 4, size=m), rng.integers(0, 2, size=m))
    assert 0.0 <= mi <= math.log(2) + 1e-12


def test_memorizing_predictor_gives_ln2_per_index():
    masks = np.array([[0, 1, 1], [1, 0, 1], [0, 0, 0], [1, 1, 0]])
    truth_l, truth_r = np.array([0, 1, 2]), np.array([1, 2, 0])
    # predict correctly on the trained slot, a fixed wrong label on the other
    left = np.where(masks == 0, truth_l, 9)
    right = np.where(masks == 1, truth_r, 9)
    mi = per_index_mi(masks, left, right)
    np.testing.assert_allclose(mi, math.log(2), atol=1e-15)


def test_fixed_predictor_gives_zero_mi():
    masks = np.random.default_rng(1).integers(0, 2, size=(5, 30))
    preds = np.tile(np.arange(30) % 3, (5, 1))
    assert np.all(per_index_mi(masks, preds, preds) == 0.0)


def test_fcmi_bound_and_estimate():
    assert fcmi_bound(0.0, 10) == 0.0
    assert fcmi_bound(50.0, 100) == 1.0
    est = FcmiEstimate([0.2, 0.4], n=100, k1=2, k2=5)
    assert est.mean_mi == pytest.approx(0.3)
    assert est.total_cmi == pytest.approx(30.0)
    assert est.bound == pytest.approx(math.sqrt(0.6))
    assert est.to_dict()["k2"] == 5


# ---- theory harness -------------------------------------------------------


def test_theorem1_grid_holds():
    rows = theorem1_gaussian_check(np.round(np.arange(0, 10.01, 0.1), 10))
    assert len(rows) == 101 and all(r.passed for r in rows)
    assert rows[10].recognizability == pytest.approx(math.erf(0.5), abs=1e-15)
    assert rows[0].bound == pytest.approx(1 - math.log(2))


@pytest.mark.parametrize("mu", [0.5, 1.0, 2.0, 3.0])
def test_lemma1_numeric_matches_half_mu_squared(mu):
    integral, analytic, err = lemma1_numeric(mu)
    assert analytic == mu * mu / 2
    assert err <= 1e-3


def test_lemma1_argument_checks():
    with pytest.raises(ValueError):
        lemma1_numeric(0.0)
    with pytest.raises(ValueError):
        lemma1_numeric(1.0, grid_size=10)


def test_gaussian_roc_conditions():
    curve = gaussian_roc(1.0, 1000)
    check = roc_conditions_check(curve, use_hull=False)
    assert check.passed
    assert curve.area() == pytest.approx(0.5 * (1 + math.erf(0.5)), abs=1e-5)


def test_roc_conditions_flag_bad_curves():
    bad_end = RocCurve(np.array([0, 0.5, 1.0]), np.array([0, 0.6, 0.9]), np.zeros(2))
    assert roc_conditions_check(bad_end, use_hull=False).c1_err == pytest.approx(0.1)
    decreasing = RocCurve(np.array([0, 0.5, 1.0]), np.array([0, 0.8, 0.7]), np.zeros(2))
    assert not roc_conditions_check(decreasing, use_hull=False).c2_ok


@settings(max_examples=50)
@given(score_lists, score_lists)
def test_empirical_hull_always_passes(pos, neg):
    assert roc_conditions_check(roc_curve(pos, neg)).passed


# ---- gap report -----------------------------------------------------------------


def test_gap_report_correlation():
    recs = [
        {"n": n, "train_err": 0.0, "test_err": g, "recognizability": r, "seed": s}
        for s, (n, g, r) in enumerate([(200, 0.3, 0.4), (800, 0.2, 0.3), (3200, 0.1, 0.1)])
    ]
    report = gap_report(recs)
    assert report.spearman == pytest.approx(1.0)
    assert [row.gap for row in report.rows] == [0.3, 0.2, 0.1]
    assert math.isnan(report.rows[0].fcmi_bound)


def test_gap_report_degenerate_cases():
    one = [{"n": 1, "train_err": 0, "test_err": 0.1, "recognizability": 0.2}]
    assert gap_report(one).spearman is None
    flat = one * 3
    assert gap_report(flat).spearman is None


# ---- learned recognizability ----------------------------------------------------


FAST = CriticFitConfig(hidden=(32,), epochs=30, batch_size=32, lr=0.05)


def test_report_from_scores():
    rep = report_from_scores([2.0, 3.0], [0.0, 1.0])
    assert rep.auc == 1.0 and rep.recognizability == 1.0
    assert rep.region_area == pytest.approx(1.0)
    assert set(rep.to_dict()) >= {"auc", "recognizability", "region_area"}


def test_recognizability_of_identical_distributions_is_small():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(400, 2)), rng.normal(size=(400, 2))
    rep = estimate_recognizability(a, b, seed=1, config=FAST)
    assert rep.recognizability < 0.15


def test_recognizability_of_separated_sets_is_large():
    # members are shifted; half the randomized pairs coincide with canonical ones
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(400, 2)) + 3.0, rng.normal(size=(400, 2))
    rep = estimate_recognizability(a, b, seed=1, config=FAST)
    assert 0.4 <= rep.recognizability <= 0.5 + 1e-12


def test_recognizability_is_seeded():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(60, 2)) + 1, rng.normal(size=(60, 2))
    r1 = estimate_recognizability(a, b, seed=3, config=FAST)
    r2 = estimate_recognizability(a, b, seed=3, config=FAST)
    assert r1.pos_scores.tobytes() == r2.pos_scores.tobytes()
    with pytest.raises(ValueError):
        estimate_recognizability(a[:3], b[:3], config=FAST)


def test_brute_auc_helper_agrees_on_all_small_sets():
    for pos in itertools.product([0, 1], repeat=2):
        for neg in itertools.product([0, 1], repeat=2):
            assert auc_roc(pos, neg) == brute_auc(pos, neg)
