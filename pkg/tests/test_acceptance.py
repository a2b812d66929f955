"""Acceptance gate: one test per shipped guarantee, with wall-clock budgets.

``pytest -v tests/test_acceptance.py`` prints one pass/fail line per
criterion.  Each test times its own body so that algorithmic regressions
(the exact Shapley enumeration, the counterfactual grid walk) surface here
as failures rather than as mysteriously slow CI.
"""

import json
import math
import time
from contextlib import contextmanager
from dataclasses import replace

import numpy as np
import pytest
from fastapi.testclient import TestClient

from reflect_machine.errors import CorruptLog, ReplayMismatch
from reflect_machine.evidence import TriggerConfig, build_evidence
from reflect_machine.explain import (
    boundary_proximity,
    counterfactual_search,
    feature_grid,
    shapley_exact,
)
from reflect_machine.model import CaseInstance, parse_model_spec, predict
from reflect_machine.report import build_report, report_to_json
from reflect_machine.service import create_app
from reflect_machine.session import SessionStore, create_session, replay
from reflect_machine.taxonomy import (
    EvidenceKind,
    QuestionTypeId,
    SocraticElement,
    builtin_taxonomy,
)
from reflect_machine.templates import (
    SHIPPED_PACKS,
    ReflectionQuestion,
    shipped_pack,
    validate_template,
)
from reflect_machine.triggers import (
    SelectionPolicy,
    fire_triggers,
    select_questions,
    whatif_refire,
)

from conftest import bundle_for
from factories import (
    brute_force_counterfactuals,
    random_background,
    random_case,
    random_linear_model,
    random_tree_model,
)


@contextmanager
def wall_clock(limit_s):
    start = time.perf_counter()
    yield
    elapsed = time.perf_counter() - start
    assert elapsed < limit_s, f"took {elapsed:.2f}s, budget {limit_s:.0f}s"


# ---------------------------------------------------------------------------
# 1. the ten-type structure is exactly as documented
# ---------------------------------------------------------------------------

def test_criterion_01_taxonomy_structure():
    S, E = SocraticElement, EvidenceKind
    golden = {
        "Q1": ("Case Information", {S.INFORMATION}, False,
               {E.INPUT_DATA, E.DATASHEET_FINDING}),
        "Q2": ("Relevance of Data", {S.INFORMATION, S.INTERPRETATION_INFERENCE},
               False, {E.FEATURE_CONTRIBUTION, E.ATTRIBUTION_DISAGREEMENT}),
        "Q3": ("Dataset", {S.CONCEPTS}, False, {E.DATASHEET_FINDING}),
        "Q4": ("Causal Structure of Recommendation",
               {S.INTERPRETATION_INFERENCE}, False,
               {E.FEATURE_CONTRIBUTION, E.COUNTERFACTUAL}),
        "Q5": ("Alternatives to Recommendation", {S.QUESTION, S.PURPOSE}, True,
               {E.CONTEXTUAL_INFO, E.PARTIAL_DEPENDENCE, E.COUNTERFACTUAL}),
        "Q6": ("Assumptions and Expectations of Decision-Maker",
               {S.ASSUMPTIONS}, False, {E.OPERATOR_PRIOR, E.CONTEXTUAL_INFO}),
        "Q7": ("Stakeholder Preferences", {S.POINT_OF_VIEW}, True,
               {E.STAKEHOLDER_CONTEXT, E.CONTEXTUAL_INFO}),
        "Q8": ("Consequences of Decision", {S.IMPLICATIONS}, True,
               {E.MODEL_CARD_FACT}),
        "Q9": ("Change Intervention", {S.PURPOSE}, True,
               {E.PERTURBATION, E.COUNTERFACTUAL}),
        "Q10": ("Model Behaviour", {S.ASSUMPTIONS, S.PURPOSE, S.CONCEPTS},
                False, {E.BOUNDARY_PROXIMITY, E.PERTURBATION, E.COUNTERFACTUAL,
                        E.MODEL_CARD_FACT, E.GLOBAL_IMPORTANCE}),
    }
    with wall_clock(1.0):
        t = builtin_taxonomy()
        assert [qt.id.value for qt in t.types] == [f"Q{i}" for i in range(1, 11)]
        for qt in t.types:
            name, socratic, creating, info = golden[qt.id.value]
            assert qt.name == name
            assert qt.socratic_elements == frozenset(socratic)
            assert qt.is_creating is creating
            assert qt.useful_info_kinds == frozenset(info)
            assert qt.xai_bank_categories
        assert {qt.id.value for qt in t.types if qt.is_creating} == \
            {"Q5", "Q7", "Q8", "Q9"}
        assert builtin_taxonomy() is t


# ---------------------------------------------------------------------------
# 2. every shipped template validates against the taxonomy
# ---------------------------------------------------------------------------

def test_criterion_02_shipped_packs_validate():
    with wall_clock(1.0):
        assert SHIPPED_PACKS == ("generic", "health", "education")
        for name in SHIPPED_PACKS:
            pack = shipped_pack(name)
            assert pack.templates, f"pack '{name}' is empty"
            for tpl in pack.templates:
                report = validate_template(tpl)
                assert report.violations == (), (
                    f"{tpl.id}: {[v.detail for v in report.violations]}")
        # the generic pack alone answers for every question type
        generic_types = {tpl.qtype for tpl in shipped_pack("generic").templates}
        assert generic_types == set(QuestionTypeId)


# ---------------------------------------------------------------------------
# 3. Shapley values satisfy the axioms on random models
# ---------------------------------------------------------------------------

def test_criterion_03_shapley_axioms():
    with wall_clock(5.0):
        rng = np.random.default_rng(20260815)
        for trial in range(20):
            n = int(rng.integers(1, 13))
            linear = trial % 2 == 0
            model = (random_linear_model(rng, n) if linear
                     else random_tree_model(rng, n))
            case = random_case(rng, model)
            bg = random_background(rng, model, rows=2)
            attr = shapley_exact(model, case, bg)

            # efficiency: contributions sum to case score minus baseline
            total = math.fsum(attr.values.values())
            assert total == pytest.approx(
                model.score(case.values) - attr.baseline_value, abs=1e-9)

            if linear:  # closed form w_i * (x_i - mean_i)
                for f in model.feature_names:
                    mean = math.fsum(r[f] for r in bg) / len(bg)
                    expected = model.weights[f] * (case.values[f] - mean)
                    assert attr.values[f] == pytest.approx(expected, abs=1e-9)

        # dummy: an ignored feature gets exactly zero
        for _ in range(5):
            n = int(rng.integers(2, 8))
            model = random_linear_model(rng, n, zero_weight_for="f0")
            attr = shapley_exact(model, random_case(rng, model),
                                 random_background(rng, model, rows=3))
            assert attr.values["f0"] == 0.0

        # symmetry: interchangeable features get exactly equal values
        for _ in range(5):
            n = int(rng.integers(2, 8))
            model = random_linear_model(rng, n)
            weights = dict(model.weights)
            weights["f1"] = weights["f0"]
            model = replace(model, weights=weights)
            case = random_case(rng, model)
            case = case.with_changes({"f1": case.values["f0"]})
            bg = random_background(rng, model, rows=3)
            bg = [{**row, "f1": row["f0"]} for row in bg]
            attr = shapley_exact(model, case, bg)
            assert attr.values["f0"] == attr.values["f1"]


# ---------------------------------------------------------------------------
# 4. counterfactual search returns the true grid minimum
# ---------------------------------------------------------------------------

def test_criterion_04_counterfactual_minimality():
    with wall_clock(10.0):
        rng = np.random.default_rng(404)
        steps = 7
        nonempty = empty = 0
        for trial in range(20):
            n = int(rng.integers(1, 4))
            model = (random_linear_model(rng, n) if trial % 2
                     else random_tree_model(rng, n, with_categorical=trial % 3 == 0))
            case = random_case(rng, model)
            target = next(l for l in model.outcome_labels
                          if l != predict(model, case).predicted)
            max_changed = int(rng.integers(1, n + 1))
            results = counterfactual_search(model, case, target,
                                            grid_steps=steps,
                                            max_changed=max_changed)

            grids = {}
            for f in model.feature_names:
                grid = feature_grid(model, f, steps)
                if case.values[f] not in grid:
                    grid = grid + [case.values[f]]
                grids[f] = grid
            assert math.prod(len(g) for g in grids.values()) <= 10_000
            min_d, hits = brute_force_counterfactuals(
                model, case, target, grids, max_changed, False)

            if min_d is None:
                assert results == []
                empty += 1
                continue
            nonempty += 1
            assert results
            assert results[0].distance == min_d
            for cf in results:
                changed = case.with_changes(cf.changes)
                assert predict(model, changed).predicted == target
                assert len(cf.changes) <= max_changed
            assert (results[0].changes, results[0].distance) in hits
        assert nonempty >= 10 and empty >= 1


# ---------------------------------------------------------------------------
# 5. worked threshold example: predict, proximity, trigger, what-if, cf
# ---------------------------------------------------------------------------

def test_criterion_05_threshold_walkthrough():
    with wall_clock(1.0):
        model = parse_model_spec({
            "schema": [{"name": "age", "kind": "numeric", "range": [0, 120],
                        "unit": "years"}],
            "outcome_labels": ["positive", "negative"],
            "form": {"type": "linear", "weights": {"age": 1.0},
                     "threshold": 50.0},
        })
        case = CaseInstance(values={"age": 48.0})
        assert predict(model, case).predicted == "negative"

        entry = boundary_proximity(model, case).entry_for("age")
        assert entry is not None
        assert 2.0 <= entry.flip_delta <= 2.001
        assert entry.new_outcome == "positive"

        cfg = TriggerConfig(cf_grid_steps=121)
        bundle = build_evidence(model, case, cfg=cfg)
        fired = fire_triggers(model, bundle, [shipped_pack("generic")], cfg=cfg)
        boundary = [q for q in fired if q.template_id == "g-q10-boundary"]
        assert boundary and "proximity:age" in boundary[0].evidence_refs

        rec, _extra, _ev = whatif_refire(
            model, case.with_changes({"age": 53.0}),
            [shipped_pack("generic")], cfg=cfg)
        assert rec.predicted == "positive"

        cfs = counterfactual_search(model, case, "positive", grid_steps=121,
                                    max_changed=1)
        assert cfs[0].changes == {"age": 50.0}
        assert cfs[0].distance == (50.0 - 48.0) / 120.0


# ---------------------------------------------------------------------------
# 6. the shipped fixtures exercise every question type
# ---------------------------------------------------------------------------

def test_criterion_06_fixture_coverage_all_ten_types(health):
    with wall_clock(5.0):
        bundle = bundle_for(health, "outlier")
        fired = fire_triggers(health.model, bundle, list(health.packs),
                              cfg=health.cfg)
        assert {q.qtype for q in fired} == set(QuestionTypeId)


# ---------------------------------------------------------------------------
# 7. selection is budgeted, capped, creating-aware, and order-free
# ---------------------------------------------------------------------------

def test_criterion_07_selection_properties():
    taxonomy = builtin_taxonomy()
    types = list(QuestionTypeId)

    def creating(q):
        return taxonomy.by_id(q.qtype).is_creating

    with wall_clock(5.0):
        rng = np.random.default_rng(7)
        policy = SelectionPolicy()
        for _ in range(30):
            questions = [
                ReflectionQuestion(
                    template_id=f"t{i}", qtype=types[int(rng.integers(10))],
                    text="q?", rationale="r", evidence_refs=(),
                    score=float(rng.random()))
                for i in range(int(rng.integers(0, 25)))
            ]
            chosen = select_questions(questions, policy=policy)

            assert len(chosen) <= policy.budget
            for qt in types:
                assert sum(q.qtype is qt for q in chosen) <= policy.max_per_type
            assert {q.template_id for q in chosen} <= \
                {q.template_id for q in questions}
            if chosen and any(creating(q) for q in questions):
                assert any(creating(q) for q in chosen)

            wider = select_questions(
                questions, policy=replace(policy, budget=policy.budget + 1))
            assert {q.template_id for q in chosen} <= \
                {q.template_id for q in wider}

            shuffled = list(questions)
            rng.shuffle(shuffled)
            assert select_questions(shuffled, policy=policy) == chosen


# ---------------------------------------------------------------------------
# 8. byte-identical reports; replay catches tampering and gaps
# ---------------------------------------------------------------------------

def test_criterion_08_determinism_and_replay(tmp_path, health):
    with wall_clock(5.0):
        def render():
            bundle = bundle_for(health, "base")
            questions = select_questions(
                fire_triggers(health.model, bundle, list(health.packs),
                              cfg=health.cfg),
                policy=health.policy)
            return report_to_json(build_report("base", bundle, questions))

        assert render() == render()  # byte-identical across runs

        def fresh_session(store):
            return create_session(
                store, health.cases["base"], health.model,
                datasheet=health.datasheet, model_card=health.model_card,
                background=list(health.background), cfg=health.cfg,
                policy=health.policy, packs=list(health.packs))

        store = SessionStore(tmp_path / "a")
        sid = fresh_session(store).session_id
        replay(store, sid)  # intact log replays cleanly

        log = tmp_path / "a" / "sessions" / f"{sid}.jsonl"
        log.write_text(log.read_text().replace(
            '"predicted": "no-treatment"', '"predicted": "treatment-indicated"'))
        with pytest.raises(ReplayMismatch):
            replay(store, sid)

        store_b = SessionStore(tmp_path / "b")
        sid_b = fresh_session(store_b).session_id
        log_b = tmp_path / "b" / "sessions" / f"{sid_b}.jsonl"
        lines = log_b.read_text().splitlines()
        log_b.write_text("\n".join([lines[0]] + lines[2:]) + "\n")
        with pytest.raises(CorruptLog):
            store_b.session(sid_b)


# ---------------------------------------------------------------------------
# 9. the HTTP service supports the full decision loop with a faithful audit
# ---------------------------------------------------------------------------

def test_criterion_09_http_service_round_trip(tmp_path):
    with wall_clock(10.0):
        client = TestClient(create_app(data_dir=tmp_path / "svc"))

        created = client.post("/sessions",
                              json={"model": "health", "case_name": "base"})
        assert created.status_code == 201
        sid = created.json()["session_id"]

        answered = client.post(f"/sessions/{sid}/answers",
                               json={"question_index": 0,
                                     "text": "reviewed the intake notes"})
        assert answered.status_code == 200

        whatif = client.post(f"/sessions/{sid}/whatif",
                             json={"changes": {"age": 53}})
        assert whatif.status_code == 200
        assert whatif.json()["result"]["predicted"] == "treatment-indicated"

        decided = client.post(f"/sessions/{sid}/decision",
                              json={"chosen": "no-treatment",
                                    "rationale": "stable vitals, follow up"})
        assert decided.status_code == 200
        assert decided.json()["status"] == "finalized"

        audit = client.get(f"/sessions/{sid}/audit")
        assert audit.status_code == 200
        records = [json.loads(line) for line in audit.text.splitlines()]
        assert [r["kind"] for r in records] == [
            "created", "questions_attached", "answered", "whatif", "finalized"]
        assert [r["seq"] for r in records] == list(range(5))

        for late in (
            client.post(f"/sessions/{sid}/answers",
                        json={"question_index": 1, "text": "too late"}),
            client.post(f"/sessions/{sid}/whatif",
                        json={"changes": {"age": 60}}),
            client.post(f"/sessions/{sid}/decision",
                        json={"chosen": "no-treatment", "rationale": "again"}),
        ):
            assert late.status_code == 409
