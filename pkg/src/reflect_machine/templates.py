"""Question templates and template packs.

A template is a typed, slotted question text ("Does diagnosis {outcome}
follow from symptom {feature}?") plus a one-line rationale and the evidence
kinds it wants shown alongside.  Packs group templates per domain and are
plain JSON documents so deployments can ship their own wording without
touching code.

Validation is strict and happens at load time: a pack with a single bad
template is rejected whole, carrying a per-violation report.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources

from .errors import InvalidTemplate, MissingBinding, ParseError
from .taxonomy import (
    EvidenceKind,
    QuestionTypeId,
    Taxonomy,
    builtin_taxonomy,
)

#: slot marker syntax inside template text: {name}, lower_snake ascii
SLOT_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")

SHIPPED_PACKS = ("generic", "health", "education")


@dataclass(frozen=True)
class QuestionTemplate:
    id: str
    qtype: QuestionTypeId
    text: str
    slots: tuple[str, ...]
    required_evidence: frozenset[EvidenceKind]
    rationale: str
    #: which pack the template came from ("generic", "health", ...); set at
    #: load time, not stored per-template in the pack file
    domain_tag: str = ""


@dataclass(frozen=True)
class TemplatePack:
    pack: str
    domain: str
    templates: tuple[QuestionTemplate, ...]


@dataclass(frozen=True)
class Violation:
    code: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    template_id: str
    violations: tuple[Violation, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class ReflectionQuestion:
    """A rendered, ready-to-display question.

    ``evidence_refs`` are identifiers into the session's evidence map;
    ``score`` is the salience the firing trigger assigned (0..1).
    """

    template_id: str
    qtype: QuestionTypeId
    text: str
    rationale: str
    evidence_refs: tuple[str, ...]
    score: float

    def to_dict(self) -> dict:
        return {
            "template_id": self.template_id,
            "qtype": self.qtype.value,
            "text": self.text,
            "rationale": self.rationale,
            "evidence_refs": list(self.evidence_refs),
            "score": self.score,
        }


def text_slots(text: str) -> tuple[str, ...]:
    """Slot names appearing in template text, in order, deduplicated."""
    seen: list[str] = []
    for m in SLOT_RE.finditer(text):
        if m.group(1) not in seen:
            seen.append(m.group(1))
    return tuple(seen)


def validate_template(tpl: QuestionTemplate, taxonomy: Taxonomy | None = None) -> ValidationReport:
    """Check a template against the taxonomy; returns a violation report.

    Checked: the qtype exists, declared slots and text markers agree in both
    directions, the rationale is non-empty, and every required evidence kind
    is admissible for the template's question type.
    """
    taxonomy = taxonomy or builtin_taxonomy()
    violations: list[Violation] = []
    try:
        qt = taxonomy.by_id(tpl.qtype)
    except KeyError:
        violations.append(Violation("unknown_qtype", f"unknown question type '{tpl.qtype}'"))
        qt = None

    in_text = set(text_slots(tpl.text))
    declared = set(tpl.slots)
    for name in sorted(in_text - declared):
        violations.append(Violation("undeclared_slot", f"slot '{name}' appears in text but is not declared"))
    for name in sorted(declared - in_text):
        violations.append(Violation("unused_slot", f"declared slot '{name}' never appears in text"))

    if not tpl.rationale.strip():
        violations.append(Violation("empty_rationale", "rationale must be a non-empty line"))

    if qt is not None:
        for kind in sorted(tpl.required_evidence, key=lambda k: k.value):
            if kind not in qt.useful_info_kinds:
                violations.append(Violation(
                    "evidence_kind_mismatch",
                    f"evidence kind '{kind.value}' is not admissible for {qt.id.value}",
                ))
    return ValidationReport(template_id=tpl.id, violations=tuple(violations))


def render_template(
    tpl: QuestionTemplate,
    bindings: dict[str, str],
    evidence_refs: tuple[str, ...] = (),
    score: float = 0.0,
) -> ReflectionQuestion:
    """Substitute slot bindings into the template text.

    Raises :class:`MissingBinding` if any declared slot lacks a binding.
    Extra bindings are ignored.  Substitution is single-pass, so binding
    values are never re-scanned for markers.
    """
    for slot in tpl.slots:
        if slot not in bindings:
            raise MissingBinding(slot, tpl.id)

    def sub(m: re.Match) -> str:
        return str(bindings[m.group(1)])

    text = SLOT_RE.sub(sub, tpl.text)
    return ReflectionQuestion(
        template_id=tpl.id,
        qtype=tpl.qtype,
        text=text,
        rationale=tpl.rationale,
        evidence_refs=tuple(evidence_refs),
        score=float(score),
    )


# ---------------------------------------------------------------------------
# Pack (de)serialization
# ---------------------------------------------------------------------------

def _template_from_dict(raw: dict, index: int, domain_tag: str) -> QuestionTemplate:
    if not isinstance(raw, dict):
        raise ParseError(f"template #{index} is not an object")
    try:
        tid = raw["id"]
        qtype = raw["qtype"]
        text = raw["text"]
        slots = raw["slots"]
        required = raw["required_evidence"]
        rationale = raw["rationale"]
    except KeyError as exc:
        raise ParseError(f"template #{index} missing field {exc}") from None
    if not isinstance(tid, str) or not tid:
        raise ParseError(f"template #{index} has a bad id")
    if not isinstance(text, str) or not isinstance(rationale, str):
        raise ParseError(f"template '{tid}': text and rationale must be strings")
    if not isinstance(slots, list) or not all(isinstance(s, str) for s in slots):
        raise ParseError(f"template '{tid}': slots must be a list of names")
    if not isinstance(required, list):
        raise ParseError(f"template '{tid}': required_evidence must be a list")
    try:
        qt = QuestionTypeId(qtype)
    except ValueError:
        raise ParseError(f"template '{tid}': unknown qtype '{qtype}'") from None
    try:
        kinds = frozenset(EvidenceKind(k) for k in required)
    except ValueError as exc:
        raise ParseError(f"template '{tid}': {exc}") from None
    return QuestionTemplate(
        id=tid, qtype=qt, text=text, slots=tuple(slots),
        required_evidence=kinds, rationale=rationale, domain_tag=domain_tag,
    )


def load_template_pack(document: str | bytes, taxonomy: Taxonomy | None = None) -> TemplatePack:
    """Parse and validate a pack document.

    Raises :class:`ParseError` for malformed documents and
    :class:`InvalidTemplate` if any template fails validation.
    """
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"pack is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ParseError("pack document must be a JSON object")
    for fld in ("pack", "domain", "templates"):
        if fld not in raw:
            raise ParseError(f"pack document missing field '{fld}'")
    if not isinstance(raw["pack"], str) or not raw["pack"]:
        raise ParseError("pack name must be a non-empty string")
    if not isinstance(raw["templates"], list) or not raw["templates"]:
        raise ParseError("pack must contain a non-empty template list")

    templates = tuple(
        _template_from_dict(t, i, raw["pack"]) for i, t in enumerate(raw["templates"])
    )
    ids = [t.id for t in templates]
    if len(set(ids)) != len(ids):
        raise ParseError(f"pack '{raw['pack']}' has duplicate template ids")

    bad: list[ValidationReport] = []
    for tpl in templates:
        report = validate_template(tpl, taxonomy)
        if not report.ok:
            bad.append(report)
    if bad:
        details = "; ".join(
            f"{r.template_id}: " + ", ".join(v.detail for v in r.violations) for r in bad
        )
        raise InvalidTemplate(f"pack '{raw['pack']}' failed validation: {details}", bad)

    return TemplatePack(pack=raw["pack"], domain=str(raw["domain"]), templates=templates)


def pack_to_dict(pack: TemplatePack) -> dict:
    return {
        "pack": pack.pack,
        "domain": pack.domain,
        "templates": [
            {
                "id": t.id,
                "qtype": t.qtype.value,
                "text": t.text,
                "slots": list(t.slots),
                "required_evidence": sorted(k.value for k in t.required_evidence),
                "rationale": t.rationale,
            }
            for t in pack.templates
        ],
    }


def dump_template_pack(pack: TemplatePack) -> str:
    """Serialize a pack back to JSON; loading the result yields an equal pack."""
    return json.dumps(pack_to_dict(pack), indent=2, sort_keys=True) + "\n"


def shipped_pack(name: str) -> TemplatePack:
    """Load one of the packs shipped with the package by short name."""
    if name not in SHIPPED_PACKS:
        raise ParseError(f"no shipped pack named '{name}' (have {', '.join(SHIPPED_PACKS)})")
    data = resources.files("reflect_machine.packs").joinpath(f"{name}.json").read_bytes()
    return load_template_pack(data)


def load_packs(names_or_paths: list[str]) -> list[TemplatePack]:
    """Resolve a mixed list of shipped pack names and file paths, in order."""
    packs = []
    for item in names_or_paths:
        if item in SHIPPED_PACKS:
            packs.append(shipped_pack(item))
        else:
            try:
                with open(item, "r", encoding="utf-8") as fh:
                    packs.append(load_template_pack(fh.read()))
            except OSError as exc:
                raise ParseError(f"cannot read pack '{item}': {exc}") from None
    return packs
