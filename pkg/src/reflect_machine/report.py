"""Report assembly: recommendation + questions + evidence, side by side.

The report is the unit handed to the decision-maker.  Serialization is
deterministic (sorted keys, fixed indentation, trailing newline) so reports
can be diffed and archived byte-for-byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .evidence import EvidenceBundle
from .taxonomy import Taxonomy, builtin_taxonomy
from .templates import ReflectionQuestion


@dataclass(frozen=True)
class ReflectionReport:
    case_id: str
    recommendation: dict | None
    questions: tuple[ReflectionQuestion, ...]
    evidence: dict
    skipped: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "recommendation": self.recommendation,
            "questions": [q.to_dict() for q in self.questions],
            "evidence": self.evidence,
            "skipped": list(self.skipped),
        }


def build_report(case_id: str, bundle: EvidenceBundle,
                 questions: list[ReflectionQuestion]) -> ReflectionReport:
    rec = bundle.recommendation.to_dict() if bundle.recommendation else None
    return ReflectionReport(
        case_id=case_id,
        recommendation=rec,
        questions=tuple(questions),
        evidence=bundle.evidence_json(),
        skipped=bundle.skipped,
    )


def report_to_json(report: ReflectionReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def report_to_markdown(report: ReflectionReport, taxonomy: Taxonomy | None = None) -> str:
    """Human-readable rendering, questions grouped by type in type order."""
    taxonomy = taxonomy or builtin_taxonomy()
    lines: list[str] = [f"# Reflection report — {report.case_id}", ""]

    if report.recommendation is None:
        lines += ["No recommendation was computed for this case.", ""]
    else:
        rec = report.recommendation
        scores = ", ".join(f"{label}: {score:.3f}"
                           for label, score in rec["scores"].items())
        lines += [f"Recommendation: **{rec['predicted']}**  ({scores})", ""]

    if report.skipped:
        lines += ["Skipped stages: " + ", ".join(report.skipped), ""]

    by_type: dict = {}
    for q in report.questions:
        by_type.setdefault(q.qtype, []).append(q)

    for qt in taxonomy.types:
        group = by_type.get(qt.id)
        if not group:
            continue
        lines.append(f"## {qt.id.value} · {qt.name}")
        lines.append("")
        for q in group:
            lines.append(f"- **{q.text}**  _(score {q.score:.2f})_")
            lines.append(f"  - why: {q.rationale}")
            if q.evidence_refs:
                lines.append("  - evidence: " + ", ".join(q.evidence_refs))
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
