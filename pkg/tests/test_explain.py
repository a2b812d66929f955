"""Attribution, counterfactual, proximity, and dependence tests.

Shapley values are checked against an independent permutation-definition
oracle (tests/factories.py) and against the closed form for linear scorers;
the interaction example below is worked out by hand from its value table.
"""

import math

import numpy as np
import pytest

from reflect_machine.errors import (
    FeatureSetMismatch,
    IncompleteBackground,
    MissingFeature,
    NotNumeric,
    TargetError,
    TooManyFeatures,
)
from reflect_machine.explain import (
    SHAPLEY_CAP,
    boundary_proximity,
    change_distance,
    feature_grid,
    global_importance,
    occlusion,
    partial_dependence,
    rank_disagreement,
    shapley_exact,
)
from reflect_machine.model import MISSING, CaseInstance, parse_model_spec, predict

from factories import (
    random_background,
    random_case,
    random_linear_model,
    random_tree_model,
    shapley_permutation_oracle,
)


def small_linear():
    """score = 2a + 3b + 1 over a,b in [0, 10]."""
    return parse_model_spec({
        "schema": [
            {"name": "a", "kind": "numeric", "range": [0, 10]},
            {"name": "b", "kind": "numeric", "range": [0, 10]},
        ],
        "outcome_labels": ["hi", "lo"],
        "form": {"type": "linear", "weights": {"a": 2.0, "b": 3.0},
                 "intercept": 1.0, "threshold": 0.0},
    })


# ---------------------------------------------------------------------------
# Shapley: linear closed form and the permutation oracle
# ---------------------------------------------------------------------------

def test_shapley_linear_closed_form_by_hand():
    model = small_linear()
    case = CaseInstance(values={"a": 5, "b": 7})
    bg = [{"a": 1, "b": 2}, {"a": 3, "b": 4}]  # means (2, 3)
    attr = shapley_exact(model, case, bg)
    assert attr.method == "shapley"
    assert attr.values["a"] == pytest.approx(2.0 * (5 - 2), abs=1e-12)
    assert attr.values["b"] == pytest.approx(3.0 * (7 - 3), abs=1e-12)
    assert attr.baseline_value == pytest.approx((9 + 19) / 2, abs=1e-12)


def test_shapley_matches_permutation_oracle():
    rng = np.random.default_rng(7)
    for trial in range(12):
        n = int(rng.integers(1, 5))
        if trial % 2 == 0:
            model = random_linear_model(rng, n)
        else:
            model = random_tree_model(rng, n, with_categorical=(n > 1))
        case = random_case(rng, model)
        bg = random_background(rng, model, rows=int(rng.integers(1, 5)))
        attr = shapley_exact(model, case, bg)
        oracle = shapley_permutation_oracle(model, case.values, bg)
        for name in model.feature_names:
            assert attr.values[name] == pytest.approx(oracle[name], abs=1e-9)


def test_shapley_efficiency_axiom():
    rng = np.random.default_rng(11)
    for trial in range(10):
        n = int(rng.integers(2, 7))
        model = (random_linear_model(rng, n) if trial % 2
                 else random_tree_model(rng, n))
        case = random_case(rng, model)
        bg = random_background(rng, model, rows=3)
        attr = shapley_exact(model, case, bg)
        total = math.fsum(attr.values.values())
        case_score = model.score(case.values)
        assert total == pytest.approx(case_score - attr.baseline_value, abs=1e-9)


def test_shapley_dummy_axiom_is_exact():
    rng = np.random.default_rng(13)
    model = random_linear_model(rng, 4, zero_weight_for="f2")
    case = random_case(rng, model)
    bg = random_background(rng, model, rows=4)
    assert shapley_exact(model, case, bg).values["f2"] == 0.0


def test_shapley_symmetry_axiom_is_exact():
    model = parse_model_spec({
        "schema": [
            {"name": "a", "kind": "numeric", "range": [0, 10]},
            {"name": "b", "kind": "numeric", "range": [0, 10]},
            {"name": "c", "kind": "numeric", "range": [0, 10]},
        ],
        "outcome_labels": ["hi", "lo"],
        "form": {"type": "linear",
                 "weights": {"a": 1.7, "b": 1.7, "c": 0.4}},
    })
    case = CaseInstance(values={"a": 2.0, "b": 2.0, "c": 9.0})
    bg = [{"a": 4.0, "b": 4.0, "c": 1.0}, {"a": 0.5, "b": 0.5, "c": 3.0}]
    attr = shapley_exact(model, case, bg)
    assert attr.values["a"] == attr.values["b"]


def test_shapley_feature_cap():
    rng = np.random.default_rng(17)
    model = random_linear_model(rng, SHAPLEY_CAP + 1)
    case = random_case(rng, model)
    bg = random_background(rng, model, rows=1)
    with pytest.raises(TooManyFeatures) as exc:
        shapley_exact(model, case, bg)
    assert exc.value.count == SHAPLEY_CAP + 1
    assert exc.value.cap == SHAPLEY_CAP


def test_shapley_requires_complete_inputs():
    model = small_linear()
    with pytest.raises(MissingFeature):
        shapley_exact(model, CaseInstance(values={"a": 1, "b": MISSING}),
                      [{"a": 0, "b": 0}])
    with pytest.raises(IncompleteBackground):
        shapley_exact(model, CaseInstance(values={"a": 1, "b": 2}), [])
    with pytest.raises(IncompleteBackground):
        shapley_exact(model, CaseInstance(values={"a": 1, "b": 2}), [{"a": 0}])


# ---------------------------------------------------------------------------
# Occlusion and rank disagreement
# ---------------------------------------------------------------------------

def test_occlusion_by_hand():
    model = small_linear()
    case = CaseInstance(values={"a": 5, "b": 7})
    bg = [{"a": 1, "b": 2}, {"a": 3, "b": 4}]
    attr = occlusion(model, case, bg)
    assert attr.method == "occlusion"
    # base 32; occluding a -> mean(24, 28); occluding b -> mean(17, 23)
    assert attr.values["a"] == pytest.approx(32 - 26, abs=1e-12)
    assert attr.values["b"] == pytest.approx(32 - 20, abs=1e-12)
    assert attr.baseline_value == pytest.approx(14.0, abs=1e-12)


def test_occlusion_equals_shapley_for_additive_scores():
    rng = np.random.default_rng(19)
    for _ in range(6):
        model = random_linear_model(rng, int(rng.integers(2, 6)))
        case = random_case(rng, model)
        bg = random_background(rng, model, rows=3)
        shap = shapley_exact(model, case, bg)
        occ = occlusion(model, case, bg)
        for name in model.feature_names:
            assert shap.values[name] == pytest.approx(occ.values[name], abs=1e-9)


def and_tree():
    """score 1 iff a >= 1 and b >= 1, else 0."""
    return parse_model_spec({
        "schema": [
            {"name": "a", "kind": "numeric", "range": [0, 2]},
            {"name": "b", "kind": "numeric", "range": [0, 2]},
        ],
        "outcome_labels": ["on", "off"],
        "form": {"type": "tree", "threshold": 0.5, "nodes": [
            {"feature": "a", "value": 1, "left": 1, "right": 2},
            {"leaf": 0.0},
            {"feature": "b", "value": 1, "left": 3, "right": 4},
            {"leaf": 0.0},
            {"leaf": 1.0},
        ]},
    })


def test_and_tree_splits_credit_where_occlusion_does_not():
    # v(empty)=0, v(a)=0, v(b)=0, v(ab)=1 -> each feature gets half the
    # credit; occlusion removes one feature at a time and sees the full
    # drop both times.
    model = and_tree()
    case = CaseInstance(values={"a": 1, "b": 1})
    bg = [{"a": 0, "b": 0}]
    shap = shapley_exact(model, case, bg)
    occ = occlusion(model, case, bg)
    assert shap.values == {"a": 0.5, "b": 0.5}
    assert occ.values == {"a": 1.0, "b": 1.0}
    # both rank a first (name tie-break), so no disagreement is reported
    report = rank_disagreement(shap, occ)
    assert not report.top1_differs
    assert report.pair is None


def interaction_tree():
    """Hand-built three-feature tree whose value table gives different
    top features under Shapley and occlusion (worked out below)."""
    return parse_model_spec({
        "schema": [
            {"name": "x", "kind": "numeric", "range": [0, 2]},
            {"name": "y", "kind": "numeric", "range": [0, 2]},
            {"name": "z", "kind": "numeric", "range": [0, 2]},
        ],
        "outcome_labels": ["on", "off"],
        "form": {"type": "tree", "threshold": 0.5, "nodes": [
            {"feature": "x", "value": 1, "left": 1, "right": 2},
            {"feature": "y", "value": 1, "left": 3, "right": 4},
            {"feature": "y", "value": 1, "left": 7, "right": 8},
            {"leaf": 0.0},
            {"feature": "z", "value": 1, "left": 5, "right": 6},
            {"leaf": 0.1},
            {"leaf": 0.6},
            {"feature": "z", "value": 1, "left": 9, "right": 10},
            {"leaf": 1.0},
            {"leaf": 0.9},
            {"leaf": 0.3},
        ]},
    })


def test_rank_disagreement_on_interaction_tree():
    # Value table with background (0,0,0) and case (1.5,1.5,1.5):
    #   v{}=0  v{x}=0.9  v{y}=0.1  v{z}=0  v{xy}=1  v{xz}=0.3  v{yz}=0.6
    #   v{xyz}=1
    # phi_x = .9/3 + .9/6 + .3/6 + .4/3 = 0.6333...
    # phi_y = .1/3 + .1/6 + .6/6 + .7/3 = 0.3833...
    # phi_z = 0/3 - .6/6 + .5/6 + 0/3  = -0.01666...
    # occlusion: (1-0.6, 1-0.3, 1-1.0) = (0.4, 0.7, 0.0)
    model = interaction_tree()
    case = CaseInstance(values={"x": 1.5, "y": 1.5, "z": 1.5})
    bg = [{"x": 0, "y": 0, "z": 0}]
    shap = shapley_exact(model, case, bg)
    occ = occlusion(model, case, bg)
    assert shap.values["x"] == pytest.approx(0.9 / 3 + 0.9 / 6 + 0.3 / 6 + 0.4 / 3)
    assert shap.values["y"] == pytest.approx(0.1 / 3 + 0.1 / 6 + 0.6 / 6 + 0.7 / 3)
    assert shap.values["z"] == pytest.approx(-0.6 / 6 + 0.5 / 6)
    assert occ.values == pytest.approx({"x": 0.4, "y": 0.7, "z": 0.0})

    report = rank_disagreement(shap, occ)
    assert report.top_a == "x"
    assert report.top_b == "y"
    assert report.top1_differs
    assert report.pair == ("x", "y")


def test_rank_disagreement_rejects_mismatched_feature_sets():
    from reflect_machine.explain import Attribution
    a = Attribution(method="shapley", values={"x": 1.0}, baseline_value=0.0)
    b = Attribution(method="occlusion", values={"y": 1.0}, baseline_value=0.0)
    with pytest.raises(FeatureSetMismatch):
        rank_disagreement(a, b)


def test_rank_disagreement_tie_breaks_on_name():
    from reflect_machine.explain import Attribution
    a = Attribution(method="shapley", values={"b": -2.0, "a": 2.0},
                    baseline_value=0.0)
    report = rank_disagreement(a, a)
    assert report.top_a == "a"  # equal magnitude, alphabetical wins


# ---------------------------------------------------------------------------
# Grids and distances
# ---------------------------------------------------------------------------

def test_feature_grid():
    model = and_tree()
    assert feature_grid(model, "a", 5) == [0.0, 0.5, 1.0, 1.5, 2.0]
    with pytest.raises(TargetError):
        feature_grid(model, "a", 0)

    cat_model = parse_model_spec({
        "schema": [{"name": "c", "kind": "categorical",
                    "categories": ["red", "green"]}],
        "outcome_labels": ["a", "b"],
        "form": {"type": "tree", "nodes": [{"leaf": 0.0}]},
    })
    assert feature_grid(cat_model, "c", 11) == ["red", "green"]


def test_change_distance():
    model = parse_model_spec({
        "schema": [
            {"name": "a", "kind": "numeric", "range": [0, 10]},
            {"name": "c", "kind": "categorical", "categories": ["red", "blue"]},
        ],
        "outcome_labels": ["x", "y"],
        "form": {"type": "tree", "nodes": [{"leaf": 0.0}]},
    })
    values = {"a": 2.0, "c": "red"}
    assert change_distance(model, values, {"a": 7.0}) == pytest.approx(0.5)
    assert change_distance(model, values, {"c": "blue"}) == 1.0
    assert change_distance(model, values, {"c": "red"}) == 0.0
    assert change_distance(model, values, {"a": 7.0, "c": "blue"}) == pytest.approx(1.5)
    assert change_distance(model, values, {}) == 0.0


# ---------------------------------------------------------------------------
# Partial dependence
# ---------------------------------------------------------------------------

def test_partial_dependence_closed_form():
    model = small_linear()
    bg = [{"a": 1, "b": 2}, {"a": 3, "b": 4}]
    curve = partial_dependence(model, "a", bg, grid_steps=3)
    assert curve.feature == "a"
    assert curve.grid == (0.0, 5.0, 10.0)
    # mean over rows of 2g + 3*b + 1 = 2g + 10
    assert curve.means == pytest.approx((10.0, 20.0, 30.0))


def test_partial_dependence_rejects_categorical():
    model = parse_model_spec({
        "schema": [{"name": "c", "kind": "categorical", "categories": ["r", "g"]}],
        "outcome_labels": ["a", "b"],
        "form": {"type": "tree", "nodes": [{"leaf": 0.0}]},
    })
    with pytest.raises(NotNumeric):
        partial_dependence(model, "c", [{"c": "r"}])


# ---------------------------------------------------------------------------
# Boundary proximity
# ---------------------------------------------------------------------------

def age_threshold_model():
    return parse_model_spec({
        "schema": [{"name": "age", "kind": "numeric", "range": [0, 120],
                    "unit": "years"}],
        "outcome_labels": ["positive", "negative"],
        "form": {"type": "linear", "weights": {"age": 1.0}, "threshold": 50.0},
    })


def test_proximity_brackets_a_known_boundary():
    model = age_threshold_model()
    report = boundary_proximity(model, CaseInstance(values={"age": 48}))
    assert report.base_outcome == "negative"
    entry = report.entry_for("age")
    assert entry is not None
    # the decision flips exactly at +2; bisection stops within
    # PROXIMITY_RESOLUTION * width = 1.2e-4 above it
    assert 2.0 <= entry.flip_delta <= 2.001
    assert entry.new_value == 48 + entry.flip_delta
    assert entry.new_outcome == "positive"


def test_proximity_soundness_on_random_models():
    rng = np.random.default_rng(23)
    for trial in range(8):
        n = int(rng.integers(1, 4))
        model = (random_linear_model(rng, n) if trial % 2
                 else random_tree_model(rng, n, with_categorical=(n > 1)))
        case = random_case(rng, model)
        base = predict(model, case).predicted
        report = boundary_proximity(model, case)
        assert report.base_outcome == base
        for entry in report.entries:
            flipped = predict(
                model, case.with_changes({entry.feature: entry.new_value}))
            assert flipped.predicted != base
            assert flipped.predicted == entry.new_outcome
            spec = model.spec(entry.feature)
            if spec.kind == "numeric":
                assert abs(entry.flip_delta) <= 0.5 * spec.width + 1e-9
            else:
                assert entry.flip_delta is None


def test_proximity_categorical_takes_first_flipping_category():
    model = parse_model_spec({
        "schema": [{"name": "c", "kind": "categorical",
                    "categories": ["r", "g", "b"]}],
        "outcome_labels": ["on", "off"],
        "form": {"type": "tree", "threshold": 0.5, "nodes": [
            {"feature": "c", "value": "r", "left": 1, "right": 2},
            {"leaf": 0.0},
            {"leaf": 1.0},
        ]},
    })
    report = boundary_proximity(model, CaseInstance(values={"c": "r"}))
    entry = report.entry_for("c")
    assert entry.new_value == "g"  # first in declared order that flips
    assert entry.flip_delta is None


def test_proximity_feature_that_cannot_flip_is_absent(health):
    # with the base case, the heart-rate weight is too small to cross the
    # boundary inside the probe interval, so only age appears
    report = boundary_proximity(health.model, health.cases["base"],
                                search_frac=0.5)
    assert [e.feature for e in report.entries] == ["age"]
    assert report.entries[0].flip_delta == pytest.approx(1.28, abs=2e-4)


def test_proximity_flip_at_probe_edge_is_exact(health):
    # outlier case: heart rate can only reach the boundary at the very top
    # of its legal range, which the scan hits exactly
    report = boundary_proximity(health.model, health.cases["outlier"])
    hr = report.entry_for("resting_heart_rate")
    assert hr.flip_delta == 10.0
    assert report.entry_for("age").flip_delta == pytest.approx(0.1, abs=2e-4)


# ---------------------------------------------------------------------------
# Global importance
# ---------------------------------------------------------------------------

def test_global_importance_by_hand():
    model = small_linear()
    bg = [{"a": 1, "b": 2}, {"a": 3, "b": 4}]
    attr = global_importance(model, bg)
    assert attr.method == "shapley"
    # per-row |w (x - mean)| averaged: a -> |2*(1-2)|,|2*(3-2)| -> 2
    assert attr.values["a"] == pytest.approx(2.0, abs=1e-12)
    assert attr.values["b"] == pytest.approx(3.0, abs=1e-12)
    assert attr.baseline_value == pytest.approx(14.0, abs=1e-12)


def test_global_importance_respects_cap():
    rng = np.random.default_rng(29)
    model = random_linear_model(rng, 3)
    bg = random_background(rng, model, rows=2)
    with pytest.raises(TooManyFeatures):
        global_importance(model, bg, cap=2)
