"""
A first reflection report
=========================

The shortest useful tour: take the bundled health screening model, run one
case through evidence building, fire the question triggers, select a
budgeted set, and print the report a decision-maker would see.
"""

from reflect_machine.evidence import build_evidence
from reflect_machine.fixtures import load_fixture
from reflect_machine.report import build_report, report_to_markdown
from reflect_machine.triggers import fire_triggers, select_questions

fx = load_fixture("health")
case = fx.cases["base"]  # a 48-year-old with a resting heart rate of 72

# Stage one: everything the triggers might cite, computed up front.  The
# bundle holds the recommendation itself plus attributions, counterfactuals,
# boundary probes, data-quality findings, and the model card, each stored
# under a stable evidence id.
bundle = build_evidence(fx.model, case, datasheet=fx.datasheet,
                        model_card=fx.model_card, background=fx.background,
                        cfg=fx.cfg)

print(f"recommendation: {bundle.recommendation.predicted}")
print(f"margin over runner-up: {bundle.recommendation.margin:.3f}")
print(f"evidence items: {len(bundle.evidence)}")
print()

# Stage two: run the trigger catalog.  Each firing resolves a wording from
# the template packs and arrives scored; selection then keeps a small,
# type-capped slate so the decision-maker is nudged, not flooded.
fired = fire_triggers(fx.model, bundle, list(fx.packs), cfg=fx.cfg)
chosen = select_questions(fired, policy=fx.policy)
print(f"{len(fired)} questions fired, {len(chosen)} kept by the policy")
print()

report = build_report("base", bundle, chosen)
print(report_to_markdown(report))
