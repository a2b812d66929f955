"""Question taxonomy for critical reflection beside a tabular decision aid.

The core idea: instead of explaining a recommendation, the system asks the
decision-maker questions.  Each question belongs to one of ten fixed types
(Q1..Q10).  A type bundles

* the Socratic elements of thought it probes (purpose, assumptions, point of
  view, ...),
* the Bloom levels it exercises (four types demand *creating* an answer from
  scratch rather than analysing or evaluating given material),
* the categories of an explainability question bank it overlaps with, and
* the kinds of supporting evidence that can legitimately accompany it.

The per-type evidence whitelist is load-bearing: templates and fired
questions may only cite evidence kinds their type admits, which keeps the
provenance of every displayed question checkable.

``builtin_taxonomy()`` returns the canonical ten-type structure; everything
else in the package (templates, triggers, sessions) is expressed against it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class QuestionTypeId(str, Enum):
    """Stable identifiers for the ten question types."""

    Q1 = "Q1"
    Q2 = "Q2"
    Q3 = "Q3"
    Q4 = "Q4"
    Q5 = "Q5"
    Q6 = "Q6"
    Q7 = "Q7"
    Q8 = "Q8"
    Q9 = "Q9"
    Q10 = "Q10"

    @property
    def index(self) -> int:
        """Numeric rank (1..10), used for deterministic ordering."""
        return int(self.value[1:])


class SocraticElement(str, Enum):
    """Elements of thought probed by Socratic questioning."""

    PURPOSE = "purpose"
    QUESTION = "question"
    INFORMATION = "information"
    INTERPRETATION_INFERENCE = "interpretation_inference"
    CONCEPTS = "concepts"
    ASSUMPTIONS = "assumptions"
    IMPLICATIONS = "implications"
    POINT_OF_VIEW = "point_of_view"


class XaiBankCategory(str, Enum):
    """Categories of the explainability question bank a type overlaps with."""

    HOW = "how"
    WHY = "why"
    WHY_NOT = "why_not"
    HOW_TO_BE_THAT = "how_to_be_that"
    HOW_TO_STILL_BE_THIS = "how_to_still_be_this"
    WHAT_IF = "what_if"
    PERFORMANCE = "performance"
    DATA = "data"
    OUTPUT = "output"
    OTHERS = "others"


class BloomLevel(str, Enum):
    """Cognitive levels a question exercises (upper half of the hierarchy)."""

    ANALYSING = "analysing"
    EVALUATING = "evaluating"
    CREATING = "creating"


class EvidenceKind(str, Enum):
    """Kinds of supporting material a question may cite.

    Covers case inputs, dataset documentation findings, the desk-scale
    explanation artifacts, model-card facts, and the human-side context
    (stakeholder preferences, the operator's own prior).
    """

    INPUT_DATA = "input_data"
    DATASHEET_FINDING = "datasheet_finding"
    FEATURE_CONTRIBUTION = "feature_contribution"
    ATTRIBUTION_DISAGREEMENT = "attribution_disagreement"
    COUNTERFACTUAL = "counterfactual"
    PARTIAL_DEPENDENCE = "partial_dependence"
    PERTURBATION = "perturbation"
    BOUNDARY_PROXIMITY = "boundary_proximity"
    GLOBAL_IMPORTANCE = "global_importance"
    MODEL_CARD_FACT = "model_card_fact"
    STAKEHOLDER_CONTEXT = "stakeholder_context"
    OPERATOR_PRIOR = "operator_prior"
    CONTEXTUAL_INFO = "contextual_info"


@dataclass(frozen=True)
class QuestionType:
    """One of the ten reflection-question types."""

    id: QuestionTypeId
    name: str
    description: str
    socratic_elements: frozenset[SocraticElement]
    xai_bank_categories: frozenset[XaiBankCategory]
    bloom_levels: frozenset[BloomLevel]
    useful_info_kinds: frozenset[EvidenceKind]

    @property
    def is_creating(self) -> bool:
        return BloomLevel.CREATING in self.bloom_levels


@dataclass(frozen=True)
class Taxonomy:
    """The full structure: ten types plus derived edge sets.

    ``edges_socratic`` and ``edges_xai`` are flat relations derived from the
    per-type sets; they exist so graph-style consumers (the console's badge
    rendering, audits) do not have to re-derive them.
    """

    types: tuple[QuestionType, ...]
    edges_socratic: frozenset[tuple[SocraticElement, QuestionTypeId]] = field(default=frozenset())
    edges_xai: frozenset[tuple[QuestionTypeId, XaiBankCategory]] = field(default=frozenset())

    def by_id(self, qid: QuestionTypeId) -> QuestionType:
        for t in self.types:
            if t.id is qid or t.id == qid:
                return t
        raise KeyError(qid)


# ---------------------------------------------------------------------------
# Canonical type definitions
# ---------------------------------------------------------------------------
# Shorthand aliases keep the table below readable.
_S = SocraticElement
_X = XaiBankCategory
_B = BloomLevel
_E = EvidenceKind

_ANALYSE_EVALUATE = frozenset({_B.ANALYSING, _B.EVALUATING})
_CREATE = frozenset({_B.CREATING})


def _qt(qid, name, description, socratic, xai, bloom, info) -> QuestionType:
    return QuestionType(
        id=qid,
        name=name,
        description=description,
        socratic_elements=frozenset(socratic),
        xai_bank_categories=frozenset(xai),
        bloom_levels=bloom,
        useful_info_kinds=frozenset(info),
    )


_TYPES: tuple[QuestionType, ...] = (
    # -- Q1 -----------------------------------------------------------------
    _qt(
        QuestionTypeId.Q1,
        "Case Information",
        "Assess, inspect, and contextualise the data of the case at hand to "
        "check its quality, reliability, and completeness.",
        {_S.INFORMATION},
        {_X.DATA},
        _ANALYSE_EVALUATE,
        {_E.INPUT_DATA, _E.DATASHEET_FINDING},
    ),
    # -- Q2 -----------------------------------------------------------------
    _qt(
        QuestionTypeId.Q2,
        "Relevance of Data",
        "Weigh whether the available data actually supports the "
        "recommendation: which parts carry it, which are beside the point.",
        {_S.INFORMATION, _S.INTERPRETATION_INFERENCE},
        {_X.WHY},
        _ANALYSE_EVALUATE,
        {_E.FEATURE_CONTRIBUTION, _E.ATTRIBUTION_DISAGREEMENT},
    ),
    # -- Q3 -----------------------------------------------------------------
    _qt(
        QuestionTypeId.Q3,
        "Dataset",
        "Probe the dataset behind the model: does it represent the "
        "phenomenon, and which of its limitations or characteristics matter "
        "for this case.",
        {_S.CONCEPTS},
        {_X.DATA},
        _ANALYSE_EVALUATE,
        {_E.DATASHEET_FINDING},
    ),
    # -- Q4 -----------------------------------------------------------------
    _qt(
        QuestionTypeId.Q4,
        "Causal Structure of Recommendation",
        "Test whether the outcome plausibly follows from the data, i.e. "
        "whether the causal structure behind the recommendation is sound.",
        {_S.INTERPRETATION_INFERENCE},
        {_X.WHY, _X.HOW},
        _ANALYSE_EVALUATE,
        {_E.FEATURE_CONTRIBUTION, _E.COUNTERFACTUAL},
    ),
    # -- Q5 -----------------------------------------------------------------
    _qt(
        QuestionTypeId.Q5,
        "Alternatives to Recommendation",
        "Open up the solution space: could a different outcome fit, and "
        "what would speak for it.",
        {_S.QUESTION, _S.PURPOSE},
        {_X.WHY_NOT, _X.WHAT_IF, _X.OUTPUT},
        _CREATE,
        {_E.CONTEXTUAL_INFO, _E.PARTIAL_DEPENDENCE, _E.COUNTERFACTUAL},
    ),
    # -- Q6 -----------------------------------------------------------------
    _qt(
        QuestionTypeId.Q6,
        "Assumptions and Expectations of Decision-Maker",
        "Surface what the decision-maker is taking for granted, including "
        "their own expectations and possible cognitive biases.",
        {_S.ASSUMPTIONS},
        {_X.OTHERS},
        _ANALYSE_EVALUATE,
        {_E.OPERATOR_PRIOR, _E.CONTEXTUAL_INFO},
    ),
    # -- Q7 -----------------------------------------------------------------
    _qt(
        QuestionTypeId.Q7,
        "Stakeholder Preferences",
        "Bring the preferences and needs of the people concerned into the "
        "decision, widening the decision-maker's point of view.",
        {_S.POINT_OF_VIEW},
        {_X.OUTPUT, _X.OTHERS},
        _CREATE,
        {_E.STAKEHOLDER_CONTEXT, _E.CONTEXTUAL_INFO},
    ),
    # -- Q8 -----------------------------------------------------------------
    _qt(
        QuestionTypeId.Q8,
        "Consequences of Decision",
        "Look forward: anticipate consequences and trade-offs of acting on "
        "the recommendation, intended or not, and how to mitigate them.",
        {_S.IMPLICATIONS},
        {_X.OUTPUT, _X.PERFORMANCE},
        _CREATE,
        {_E.MODEL_CARD_FACT},
    ),
    # -- Q9 -----------------------------------------------------------------
    _qt(
        QuestionTypeId.Q9,
        "Change Intervention",
        "Explore feasible, preferably small, interventions that would make "
        "a desired outcome more likely.",
        {_S.PURPOSE},
        {_X.HOW_TO_BE_THAT, _X.WHAT_IF},
        _CREATE,
        {_E.PERTURBATION, _E.COUNTERFACTUAL},
    ),
    # -- Q10 ----------------------------------------------------------------
    _qt(
        QuestionTypeId.Q10,
        "Model Behaviour",
        "Examine the assumptions, rules and thresholds built into the model "
        "itself: up to which point does the result stay the same, and where "
        "does it tip.",
        {_S.ASSUMPTIONS, _S.PURPOSE, _S.CONCEPTS},
        {_X.HOW, _X.HOW_TO_STILL_BE_THIS, _X.PERFORMANCE, _X.WHAT_IF},
        _ANALYSE_EVALUATE,
        {_E.BOUNDARY_PROXIMITY, _E.PERTURBATION, _E.COUNTERFACTUAL,
         _E.MODEL_CARD_FACT, _E.GLOBAL_IMPORTANCE},
    ),
)

#: Question types whose Bloom profile is {creating}.
CREATING_TYPES: frozenset[QuestionTypeId] = frozenset(
    t.id for t in _TYPES if t.is_creating
)

_BUILTIN: Taxonomy | None = None


def builtin_taxonomy() -> Taxonomy:
    """Return the canonical taxonomy (same instance on every call)."""
    global _BUILTIN
    if _BUILTIN is None:
        edges_s = frozenset(
            (s, t.id) for t in _TYPES for s in t.socratic_elements
        )
        edges_x = frozenset(
            (t.id, x) for t in _TYPES for x in t.xai_bank_categories
        )
        _BUILTIN = Taxonomy(types=_TYPES, edges_socratic=edges_s, edges_xai=edges_x)
    return _BUILTIN


def lookup_type(taxonomy: Taxonomy, qid: QuestionTypeId | str) -> QuestionType:
    """Fetch a type by id; raises ``KeyError`` for unknown ids."""
    if isinstance(qid, str) and not isinstance(qid, QuestionTypeId):
        try:
            qid = QuestionTypeId(qid)
        except ValueError:
            raise KeyError(qid) from None
    return taxonomy.by_id(qid)
