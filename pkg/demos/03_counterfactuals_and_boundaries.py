"""
Counterfactuals, decision boundaries, and what-if probing
=========================================================

Three ways of asking "what would change the outcome?":

* counterfactual search — smallest grid moves that reach a target label,
  optionally restricted to features a person could actually act on;
* boundary proximity — per feature, the smallest nudge that flips the
  prediction at all;
* what-if re-firing — score a hypothetical variant of the case and re-run
  just the intervention-facing question rules against it.
"""

from reflect_machine.explain import boundary_proximity, counterfactual_search
from reflect_machine.fixtures import load_fixture
from reflect_machine.triggers import whatif_refire

fx = load_fixture("health")
case = fx.cases["base"]
model = fx.model

print(f"case: {case.values}")

# Any change allowed: age dominates the score, so the cheapest route to the
# other label is a two-year shift on a 120-year range.
for cf in counterfactual_search(model, case, "treatment-indicated",
                                grid_steps=121):
    print(f"  any change:     {cf.changes}  (distance {cf.distance:.4f})")

# Restricted to mutable features, age is off the table; the search has to
# work the heart-rate axis instead, and the distance records how much
# further away that intervention is.
for cf in counterfactual_search(model, case, "treatment-indicated",
                                grid_steps=121, mutable_only=True):
    print(f"  mutable change: {cf.changes}  (distance {cf.distance:.4f})")
print()

# Boundary proximity asks the same question per feature, without a target:
# how far to the nearest flip in either direction?
prox = boundary_proximity(model, case)
for entry in prox.entries:
    print(f"  {entry.feature}: flips at {entry.new_value:g} "
          f"(delta {entry.flip_delta:+.4g}) -> {entry.new_outcome}")
print()

# A what-if run answers "suppose the patient were five years older" with a
# fresh recommendation plus only the questions that concern interventions
# and decision limits (the rest of the report is unchanged by design).
rec, questions, evidence = whatif_refire(
    model, case.with_changes({"age": 53.0}), list(fx.packs), cfg=fx.cfg)
print(f"what-if age=53: {rec.predicted} "
      f"(margin {rec.margin:.3f})")
for q in questions:
    print(f"  [{q.qtype.value}] {q.text}")
print(f"  cited evidence: {sorted(evidence)}")
