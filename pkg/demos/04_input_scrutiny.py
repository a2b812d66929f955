"""
Scrutinizing the inputs before trusting the output
==================================================

Questions about the case record and the training data need their own
evidence.  Three checks run before any score is computed: field validation
against the schema, a distribution comparison against documented per-feature
statistics, and a read of the datasheet for staleness, thin samples,
under-represented subgroups, and factors the model never sees.
"""

import datetime as dt

from reflect_machine.fixtures import load_fixture
from reflect_machine.model import datasheet_findings, distribution_report, validate_case

fx = load_fixture("health")
as_of = dt.date(2026, 1, 15)

# An incomplete record: the missing field is reported, and every downstream
# stage that would need it is skipped rather than silently imputed.
incomplete = fx.cases["incomplete"]
report = validate_case(fx.model, incomplete)
print("validation of the incomplete case:")
for finding in report.findings:
    print(f"  {finding.feature}: {finding.kind} — {finding.detail}")
print()

# A resting heart rate of 190 is legal by the schema but sits far outside
# the documented distribution; the z-score lands it in the outlier report.
outlier = fx.cases["outlier"]
dist = distribution_report(fx.datasheet, outlier)
print("distribution check of the outlier case:")
for entry in dist.entries:
    print(f"  {entry.feature}: {entry.kind}, z={entry.z:+.1f}")
print()

# The datasheet itself: collected through mid-2019, so it is years stale by
# the pinned as-of date; one subgroup is thin; BMI was never collected.
print("datasheet findings:")
for finding in datasheet_findings(fx.datasheet, now=as_of):
    print(f"  [{finding.kind}] {finding.detail}")
