"""
Bringing your own domain
========================

Nothing in the pipeline is specific to the bundled fixtures.  This script
wires up a small loan-screening model from scratch — schema, case, datasheet,
model card — plus a three-template domain pack written to a temporary file,
and runs the full loop.  Domain packs are scanned before the generic pack,
so domain wording wins whenever both could answer the same question type.
"""

import datetime as dt
import json
import tempfile
from pathlib import Path

from reflect_machine.evidence import TriggerConfig, build_evidence
from reflect_machine.model import (
    CaseInstance,
    parse_datasheet,
    parse_model_card,
    parse_model_spec,
)
from reflect_machine.report import build_report, report_to_markdown
from reflect_machine.templates import load_packs, validate_template
from reflect_machine.triggers import fire_triggers, select_questions

model = parse_model_spec({
    "schema": [
        {"name": "monthly_income", "kind": "numeric", "range": [0, 20000],
         "unit": "euros", "mutable": False},
        {"name": "open_credit_lines", "kind": "numeric", "range": [0, 20],
         "mutable": True},
        {"name": "employment", "kind": "categorical",
         "categories": ["permanent", "temporary", "self-employed"],
         "mutable": False},
    ],
    "outcome_labels": ["approve", "refer-to-analyst"],
    "form": {"type": "tree", "threshold": 0.0, "nodes": [
        {"feature": "monthly_income", "value": 2500, "left": 1, "right": 2},
        {"leaf": -1.0},
        {"feature": "open_credit_lines", "value": 6, "left": 3, "right": 4},
        {"leaf": 1.0},
        {"leaf": -0.5},
    ]},
})

case = CaseInstance(
    values={"monthly_income": 3100.0, "open_credit_lines": 4.0,
            "employment": "temporary"},
    context_tags=["short-history"],
    stakeholder_prefs={"applicant": "prefers a fast decision over a manual review"},
)

datasheet = parse_datasheet(json.dumps({
    "source": "2021-2023 retail lending book",
    "sample_size": 4200,
    "collection_start": "2021-01-01",
    "collection_end": "2023-12-31",
    "subgroups": {"permanent": 3000, "temporary": 900, "self-employed": 300},
    "missing_factors": ["rental history"],
    "per_feature": {
        "monthly_income": {"mean": 2900.0, "stddev": 800.0},
        "open_credit_lines": {"mean": 3.0, "stddev": 2.0},
        "employment": {"frequencies": {"permanent": 3000, "temporary": 900,
                                       "self-employed": 300}},
    },
}))

model_card = parse_model_card(json.dumps({
    "error_rate": 0.08,
    "limitations": [
        {"text": "calibrated on applicants with at least a year of credit "
                 "history", "applies_tags": ["short-history"]},
    ],
}))

background = [
    {"monthly_income": 2400.0, "open_credit_lines": 2.0, "employment": "permanent"},
    {"monthly_income": 3300.0, "open_credit_lines": 7.0, "employment": "permanent"},
    {"monthly_income": 2800.0, "open_credit_lines": 3.0, "employment": "temporary"},
]

# A small domain pack: one wording per question type we care to brand.  The
# slot/evidence declarations are validated against the taxonomy before use.
pack_data = {
    "pack": "lending",
    "domain": "retail credit decisions",
    "templates": [
        {"id": "l-q2-income", "qtype": "Q2",
         "text": "How much of this recommendation rests on {feature}?",
         "slots": ["feature"], "required_evidence": ["feature_contribution"],
         "rationale": "One field dominates the score for this applicant."},
        {"id": "l-q5-manual", "qtype": "Q5",
         "text": "Would a manual review reach {runner_up} instead?",
         "slots": ["runner_up"], "required_evidence": ["contextual_info"],
         "rationale": "The scores are close enough that the alternative "
                      "outcome is live."},
        {"id": "l-q9-lines", "qtype": "Q9",
         "text": "The applicant could change this the fastest: {changes}. "
                 "Is that advisable?",
         "slots": ["changes"], "required_evidence": ["counterfactual"],
         "rationale": "A small, actionable change reaches the other outcome."},
    ],
}

with tempfile.TemporaryDirectory() as tmp:
    pack_path = Path(tmp) / "lending.json"
    pack_path.write_text(json.dumps(pack_data))
    packs = load_packs([str(pack_path), "generic"])

for tpl in packs[0].templates:
    assert validate_template(tpl).violations == ()
print(f"pack '{packs[0].pack}' validated: {len(packs[0].templates)} templates")
print()

cfg = TriggerConfig(as_of=dt.date(2026, 1, 15))
bundle = build_evidence(model, case, datasheet=datasheet,
                        model_card=model_card, background=background, cfg=cfg)
questions = select_questions(fire_triggers(model, bundle, packs, cfg=cfg))
print(report_to_markdown(build_report("applicant-0141", bundle, questions)))
