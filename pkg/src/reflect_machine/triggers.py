"""Trigger catalog: turn evidence into typed, scored reflection questions.

Each rule watches one corner of the evidence bundle and, when its condition
holds, emits a question of a fixed type with slot bindings, a salience score
in [0, 1], and references into the evidence map.  Rules never invent
wording; they pick a template from the caller's packs.

Template resolution is deterministic: packs are scanned in caller order and
the first pack containing at least one eligible template wins.  Eligible
means the type matches, every declared slot has a binding, and every
evidence kind the template requires is among the kinds the rule provides.
Within the winning pack, templates are ranked by slot coverage (more
specific wording first), then unused-before-reused within the current
round, then file order.

Selection is a separate, also deterministic step: rank by score, cap
questions per type, cut to budget, and if the budget squeezed out every
question of a *creating* type, swap the best one back in for the last seat.
"""

from __future__ import annotations

import datetime as _dt
import statistics
from collections import Counter
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Iterator, NamedTuple

from .errors import MissingTemplate, SchemaError
from .evidence import EvidenceBundle, EvidenceItem, TriggerConfig, _collect_items
from .explain import boundary_proximity, counterfactual_search
from .model import CaseInstance, Recommendation, TabularModel, predict, validate_case
from .taxonomy import QuestionTypeId, Taxonomy, builtin_taxonomy
from .templates import QuestionTemplate, ReflectionQuestion, TemplatePack, render_template


class _Firing(NamedTuple):
    score: float
    bindings: dict
    refs: tuple[str, ...]


_Rule = Callable[[TabularModel, EvidenceBundle, TriggerConfig], Iterator[_Firing]]


def describe_changes(model: TabularModel, changes: dict) -> str:
    """Render a change set as a short imperative phrase, in schema order."""
    parts = []
    for spec in model.schema:
        if spec.name not in changes:
            continue
        v = changes[spec.name]
        shown = f"{v:g}" if spec.kind == "numeric" else str(v)
        parts.append(f"set {spec.name} to {shown}")
    return " and ".join(parts)


# ---------------------------------------------------------------------------
# The rules
# ---------------------------------------------------------------------------

_ISSUE_WORDING = {
    "missing": "missing",
    "out_of_range": "out of range",
    "unknown_category": "an unknown category",
    "unknown_feature": "not in the model schema",
}


def _rule_q1_case(model, b, cfg):
    for f in b.case_report.findings:
        yield _Firing(0.9, {"feature": f.feature, "issue": _ISSUE_WORDING[f.kind]},
                      ("input-data", "case-report"))


def _rule_q1_outlier(model, b, cfg):
    if b.outliers is None:
        return
    for e in b.outliers.entries:
        if e.kind == "zscore":
            detail = (f"the recorded value {e.value:g} lies {e.z:+.1f} standard "
                      f"deviations from the documented mean of {e.mean:g}")
            score = min(1.0, abs(e.z) / 4.0)
        else:
            detail = (f"the value '{e.value}' occurs only {e.frequency} times "
                      f"in the documented sample")
            score = 0.5
        yield _Firing(score, {"feature": e.feature, "detail": detail},
                      (f"outlier:{e.feature}",))


def _rule_q2_contributors(model, b, cfg):
    if b.shapley is None:
        return
    ranked = sorted(b.shapley.values.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
    top = [kv for kv in ranked if abs(kv[1]) > 0.0][: cfg.top_k]
    if not top:
        return
    strongest = abs(top[0][1])
    for name, val in top:
        yield _Firing(abs(val) / strongest, {"feature": name}, ("attr:shapley",))


def _rule_q2_disagreement(model, b, cfg):
    if b.disagreement is not None and b.disagreement.top1_differs:
        yield _Firing(0.9, {"feature_a": b.disagreement.top_a,
                            "feature_b": b.disagreement.top_b},
                      ("disagreement", "attr:shapley", "attr:occlusion"))


def _rule_q3_stale(model, b, cfg):
    for f in b.findings:
        if f.kind == "stale":
            yield _Firing(0.7, {"age_years": str(int(f.years))}, ("datasheet:stale",))


def _rule_q3_subgroup(model, b, cfg):
    for f in b.findings:
        if f.kind == "imbalance":
            yield _Firing(0.7, {"subgroup": f.subgroup, "percent": f"{f.share:.0%}"},
                          (f"datasheet:subgroup:{f.subgroup}",))


def _rule_q3_missing_factor(model, b, cfg):
    for f in b.findings:
        if f.kind == "missing_factor":
            yield _Firing(0.8, {"factor": f.factor},
                          (f"datasheet:missing-factor:{f.factor}",))


def _rule_q4_leading_feature(model, b, cfg):
    if b.shapley is None or b.recommendation is None:
        return
    name = min(b.shapley.values, key=lambda k: (-abs(b.shapley.values[k]), k))
    if abs(b.shapley.values[name]) > 0.0:
        yield _Firing(0.8, {"outcome": b.recommendation.predicted, "feature": name},
                      ("attr:shapley",))


def _rule_q5_margin(model, b, cfg):
    rec = b.recommendation
    if rec is None or rec.margin > cfg.alt_margin:
        return
    score = 1.0 if cfg.alt_margin == 0 else 1.0 - rec.margin / cfg.alt_margin
    refs = ("recommendation",)
    if b.pd is not None:
        refs += (f"pd:{b.pd.feature}",)
    yield _Firing(score, {"alternative": rec.runner_up}, refs)


def _rule_q5_nearby(model, b, cfg):
    if not b.counterfactuals_any or b.recommendation is None:
        return
    median = statistics.median(c.distance for c in b.counterfactuals_any)
    for i, c in enumerate(b.counterfactuals_any):
        if c.achieved == b.recommendation.runner_up and c.distance <= median:
            yield _Firing(max(0.0, 1.0 - c.distance),
                          {"alternative": c.achieved,
                           "intervention": describe_changes(model, c.changes)},
                          (f"cf:any:{i}",))
            return


def _rule_q6_always(model, b, cfg):
    yield _Firing(0.3, {}, ())


def _rule_q6_prior(model, b, cfg):
    prior = b.case.operator_prior
    if prior is not None and b.recommendation is not None \
            and prior != b.recommendation.predicted:
        yield _Firing(0.9, {"predicted": b.recommendation.predicted, "prior": prior},
                      ("operator-prior", "recommendation"))


def _rule_q7_unrecorded(model, b, cfg):
    if not b.case.stakeholder_prefs:
        yield _Firing(0.7, {}, ("stakeholder-prefs",))


def _rule_q7_always(model, b, cfg):
    refs = ("stakeholder-prefs",) if b.case.stakeholder_prefs else ()
    yield _Firing(0.3, {}, refs)


def _rule_q8_limitation(model, b, cfg):
    if b.model_card is None:
        return
    tags = set(b.case.context_tags)
    for i, lim in enumerate(b.model_card.limitations):
        if set(lim.applies_tags) & tags:
            yield _Firing(0.8, {"limitation": lim.text}, (f"model-card:limitation:{i}",))


def _rule_q8_always(model, b, cfg):
    if b.recommendation is not None:
        yield _Firing(0.3, {"outcome": b.recommendation.predicted}, ())


def _rule_q9_cheapest(model, b, cfg):
    if not b.counterfactuals_mutable:
        return
    i, c = min(enumerate(b.counterfactuals_mutable),
               key=lambda ic: (ic[1].distance, ic[0]))
    yield _Firing(max(0.0, 1.0 - c.distance),
                  {"intervention": describe_changes(model, c.changes),
                   "outcome": c.achieved},
                  (f"cf:mutable:{i}",))


def _rule_q10_boundary(model, b, cfg):
    if b.proximity is None:
        return
    for e in b.proximity.entries:
        if e.flip_delta is None:
            continue
        spec = model.spec(e.feature)
        limit = cfg.prox_frac * spec.width
        if limit <= 0 or abs(e.flip_delta) > limit:
            continue
        bindings = {"feature": e.feature, "delta": f"{e.flip_delta:+.4g}"}
        if spec.unit == "years" and e.flip_delta > 0:
            bindings["delta_years"] = f"{e.flip_delta:.4g}"
        yield _Firing(1.0 - abs(e.flip_delta) / limit, bindings,
                      (f"proximity:{e.feature}",))


def _rule_q10_error_rate(model, b, cfg):
    if b.model_card is None:
        return
    rate = b.model_card.error_rate
    if rate > 0 and rate >= cfg.err_threshold:
        yield _Firing(0.6, {"error_odds": str(round(1.0 / rate))},
                      ("model-card:error-rate",))


#: the full catalog, in firing order
CATALOG: tuple[tuple[str, QuestionTypeId, _Rule], ...] = (
    ("T-Q1a", QuestionTypeId.Q1, _rule_q1_case),
    ("T-Q1b", QuestionTypeId.Q1, _rule_q1_outlier),
    ("T-Q2a", QuestionTypeId.Q2, _rule_q2_contributors),
    ("T-Q2b", QuestionTypeId.Q2, _rule_q2_disagreement),
    ("T-Q3a", QuestionTypeId.Q3, _rule_q3_stale),
    ("T-Q3b", QuestionTypeId.Q3, _rule_q3_subgroup),
    ("T-Q3c", QuestionTypeId.Q3, _rule_q3_missing_factor),
    ("T-Q4", QuestionTypeId.Q4, _rule_q4_leading_feature),
    ("T-Q5a", QuestionTypeId.Q5, _rule_q5_margin),
    ("T-Q5b", QuestionTypeId.Q5, _rule_q5_nearby),
    ("T-Q6a", QuestionTypeId.Q6, _rule_q6_always),
    ("T-Q6b", QuestionTypeId.Q6, _rule_q6_prior),
    ("T-Q7a", QuestionTypeId.Q7, _rule_q7_unrecorded),
    ("T-Q7b", QuestionTypeId.Q7, _rule_q7_always),
    ("T-Q8a", QuestionTypeId.Q8, _rule_q8_limitation),
    ("T-Q8b", QuestionTypeId.Q8, _rule_q8_always),
    ("T-Q9", QuestionTypeId.Q9, _rule_q9_cheapest),
    ("T-Q10a", QuestionTypeId.Q10, _rule_q10_boundary),
    ("T-Q10b", QuestionTypeId.Q10, _rule_q10_error_rate),
)


# ---------------------------------------------------------------------------
# Template resolution and firing
# ---------------------------------------------------------------------------

def resolve_template(
    packs: Iterable[TemplatePack],
    qtype: QuestionTypeId,
    bindings: dict,
    provided_kinds: frozenset,
    used: set[str],
) -> QuestionTemplate:
    """Pick the template for one firing; raises :class:`MissingTemplate`."""
    for pack in packs:
        eligible = [
            (i, t) for i, t in enumerate(pack.templates)
            if t.qtype == qtype
            and set(t.slots) <= bindings.keys()
            and t.required_evidence <= provided_kinds
        ]
        if eligible:
            eligible.sort(key=lambda it: (-len(set(it[1].slots)), it[1].id in used, it[0]))
            return eligible[0][1]
    raise MissingTemplate(qtype)


def fire_triggers(
    model: TabularModel,
    bundle: EvidenceBundle,
    packs: list[TemplatePack],
    cfg: TriggerConfig | None = None,
    taxonomy: Taxonomy | None = None,
) -> list[ReflectionQuestion]:
    """Run the whole catalog against a bundle; returns questions in catalog
    order (selection comes separately)."""
    cfg = cfg or TriggerConfig()
    taxonomy = taxonomy or builtin_taxonomy()
    used: set[str] = set()
    questions: list[ReflectionQuestion] = []
    for _trig_id, qtype, rule in CATALOG:
        for firing in rule(model, bundle, cfg):
            questions.append(_fire_one(bundle, packs, taxonomy, qtype, firing, used))
    return questions


def _fire_one(bundle, packs, taxonomy, qtype, firing: _Firing, used: set[str]) -> ReflectionQuestion:
    provided = frozenset(bundle.evidence[r].kind for r in firing.refs)
    # the per-type whitelist is an invariant of the catalog itself
    assert provided <= taxonomy.by_id(qtype).useful_info_kinds, \
        f"{qtype.value} fired with inadmissible evidence kinds"
    tpl = resolve_template(packs, qtype, firing.bindings, provided, used)
    used.add(tpl.id)
    return render_template(tpl, firing.bindings,
                           evidence_refs=firing.refs, score=firing.score)


# ---------------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionPolicy:
    budget: int = 5
    max_per_type: int = 2
    require_creating: bool = True

    def validate(self) -> None:
        if self.budget < 1:
            raise SchemaError("budget must be at least 1")
        if self.max_per_type < 1:
            raise SchemaError("max_per_type must be at least 1")

    def to_dict(self) -> dict:
        return {"budget": self.budget, "max_per_type": self.max_per_type,
                "require_creating": self.require_creating}

    @classmethod
    def from_dict(cls, raw: dict) -> "SelectionPolicy":
        policy = cls(budget=int(raw.get("budget", 5)),
                     max_per_type=int(raw.get("max_per_type", 2)),
                     require_creating=bool(raw.get("require_creating", True)))
        policy.validate()
        return policy


def select_questions(
    questions: list[ReflectionQuestion],
    policy: SelectionPolicy | None = None,
    taxonomy: Taxonomy | None = None,
) -> list[ReflectionQuestion]:
    """Deterministic selection: rank, cap per type, cut to budget.

    If cutting removed every question of a *creating* type while one was
    available, the best such question replaces the last seat, so a growing
    budget never loses previously shown questions.
    """
    policy = policy or SelectionPolicy()
    policy.validate()
    taxonomy = taxonomy or builtin_taxonomy()

    ranked = sorted(questions, key=lambda q: (-q.score, q.qtype.index, q.template_id))
    accepted: list[ReflectionQuestion] = []
    counts: Counter = Counter()
    for q in ranked:
        if counts[q.qtype] < policy.max_per_type:
            accepted.append(q)
            counts[q.qtype] += 1

    chosen = accepted[: policy.budget]
    if (policy.require_creating and chosen
            and not any(taxonomy.by_id(q.qtype).is_creating for q in chosen)):
        for q in accepted[policy.budget:]:
            if taxonomy.by_id(q.qtype).is_creating:
                chosen = chosen[:-1] + [q]
                break
    return chosen


# ---------------------------------------------------------------------------
# What-if re-firing
# ---------------------------------------------------------------------------

def whatif_refire(
    model: TabularModel,
    case: CaseInstance,
    packs: list[TemplatePack],
    cfg: TriggerConfig | None = None,
    taxonomy: Taxonomy | None = None,
    as_of: _dt.date | None = None,
) -> tuple[Recommendation, list[ReflectionQuestion], dict[str, EvidenceItem]]:
    """Score a modified case and re-run only the intervention-facing rules.

    Used by the session what-if path: the full bundle stays as created, but
    the cheapest-intervention and decision-limit rules (T-Q9, T-Q10a) fire
    against fresh counterfactuals and proximity probes for the modified
    case.  Returns the recommendation, the extra questions, and the evidence
    items they reference.
    """
    cfg = cfg or TriggerConfig()
    taxonomy = taxonomy or builtin_taxonomy()
    rec = predict(model, case)

    hits = []
    for target in (l for l in model.outcome_labels if l != rec.predicted):
        hits.extend(counterfactual_search(
            model, case, target, grid_steps=cfg.cf_grid_steps,
            max_changed=cfg.cf_max_changed, mutable_only=True))
    prox = boundary_proximity(model, case, search_frac=cfg.prox_search_frac)

    bundle = EvidenceBundle(
        case=case, case_report=validate_case(model, case), outliers=None,
        findings=(), recommendation=rec, shapley=None, occlusion=None,
        disagreement=None, counterfactuals_any=(),
        counterfactuals_mutable=tuple(hits), proximity=prox, global_imp=None,
        pd=None, model_card=None, skipped=(),
        as_of=as_of or cfg.as_of or _dt.date.today(), evidence={},
    )
    bundle = replace(bundle, evidence=_collect_items(bundle))

    used: set[str] = set()
    questions: list[ReflectionQuestion] = []
    for trig_id, qtype, rule in CATALOG:
        if trig_id not in ("T-Q9", "T-Q10a"):
            continue
        for firing in rule(model, bundle, cfg):
            questions.append(_fire_one(bundle, packs, taxonomy, qtype, firing, used))

    evidence = {ref: bundle.evidence[ref]
                for q in questions for ref in q.evidence_refs}
    return rec, questions, evidence
