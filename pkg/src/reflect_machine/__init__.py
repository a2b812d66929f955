"""reflect-machine: critical-reflection questions for tabular decision support.

Instead of explaining a recommendation, the pipeline puts typed, evidence-
backed questions next to it: parse a model and a case, build the evidence
bundle, fire the trigger catalog against template packs, select under a
budget, and (optionally) track the whole exchange in an auditable,
replayable session.

    >>> from reflect_machine import (parse_model_spec, parse_case,
    ...                              build_evidence, fire_triggers,
    ...                              select_questions, load_packs)
    >>> model = parse_model_spec(model_json)
    >>> case = parse_case(case_json, model)
    >>> bundle = build_evidence(model, case)
    >>> questions = select_questions(fire_triggers(model, bundle,
    ...                                            load_packs(["generic"])))
"""

from .errors import (
    ContextUnavailable,
    CorruptLog,
    FeatureSetMismatch,
    IncompleteBackground,
    InvalidTemplate,
    MissingBinding,
    MissingFeature,
    MissingTemplate,
    NotNumeric,
    ParseError,
    ReflectError,
    ReplayMismatch,
    SchemaError,
    SessionFinalized,
    StageError,
    TargetError,
    TooManyFeatures,
    UnknownSession,
)
from .evidence import EvidenceBundle, EvidenceItem, TriggerConfig, build_evidence
from .explain import (
    Attribution,
    Counterfactual,
    DisagreementReport,
    PDCurve,
    ProximityEntry,
    ProximityReport,
    boundary_proximity,
    counterfactual_search,
    global_importance,
    occlusion,
    partial_dependence,
    rank_disagreement,
    shapley_exact,
)
from .model import (
    MISSING,
    CaseInstance,
    CaseValidationReport,
    Datasheet,
    FeatureSpec,
    MetadataConfig,
    ModelCard,
    OutlierReport,
    Recommendation,
    TabularModel,
    datasheet_findings,
    distribution_report,
    parse_background,
    parse_case,
    parse_datasheet,
    parse_model_card,
    parse_model_spec,
    predict,
    validate_case,
)
from .report import ReflectionReport, build_report, report_to_json, report_to_markdown
from .session import (
    DecisionSession,
    PipelineContext,
    Record,
    SessionStore,
    create_session,
    finalize,
    fold_records,
    model_hash,
    record_answer,
    record_whatif,
    replay,
)
from .taxonomy import (
    BloomLevel,
    EvidenceKind,
    QuestionType,
    QuestionTypeId,
    SocraticElement,
    Taxonomy,
    XaiBankCategory,
    builtin_taxonomy,
)
from .templates import (
    QuestionTemplate,
    ReflectionQuestion,
    TemplatePack,
    load_packs,
    load_template_pack,
    render_template,
    shipped_pack,
    validate_template,
)
from .triggers import (
    CATALOG,
    SelectionPolicy,
    fire_triggers,
    select_questions,
    whatif_refire,
)

__version__ = "0.1.0"

__all__ = [
    "MISSING",
    "Attribution",
    "BloomLevel",
    "CATALOG",
    "CaseInstance",
    "CaseValidationReport",
    "ContextUnavailable",
    "CorruptLog",
    "Counterfactual",
    "Datasheet",
    "DecisionSession",
    "DisagreementReport",
    "EvidenceBundle",
    "EvidenceItem",
    "EvidenceKind",
    "FeatureSetMismatch",
    "FeatureSpec",
    "IncompleteBackground",
    "InvalidTemplate",
    "MetadataConfig",
    "MissingBinding",
    "MissingFeature",
    "MissingTemplate",
    "ModelCard",
    "NotNumeric",
    "OutlierReport",
    "ParseError",
    "PDCurve",
    "PipelineContext",
    "ProximityEntry",
    "ProximityReport",
    "QuestionTemplate",
    "QuestionType",
    "QuestionTypeId",
    "Recommendation",
    "Record",
    "ReflectError",
    "ReflectionQuestion",
    "ReflectionReport",
    "ReplayMismatch",
    "SchemaError",
    "SelectionPolicy",
    "SessionFinalized",
    "SessionStore",
    "SocraticElement",
    "StageError",
    "TabularModel",
    "TargetError",
    "Taxonomy",
    "TemplatePack",
    "TooManyFeatures",
    "TriggerConfig",
    "UnknownSession",
    "XaiBankCategory",
    "boundary_proximity",
    "build_evidence",
    "build_report",
    "builtin_taxonomy",
    "counterfactual_search",
    "create_session",
    "datasheet_findings",
    "distribution_report",
    "finalize",
    "fire_triggers",
    "fold_records",
    "global_importance",
    "load_packs",
    "load_template_pack",
    "model_hash",
    "occlusion",
    "parse_background",
    "parse_case",
    "parse_datasheet",
    "parse_model_card",
    "parse_model_spec",
    "partial_dependence",
    "predict",
    "rank_disagreement",
    "record_answer",
    "record_whatif",
    "render_template",
    "replay",
    "report_to_json",
    "report_to_markdown",
    "select_questions",
    "shapley_exact",
    "shipped_pack",
    "validate_case",
    "validate_template",
    "whatif_refire",
]
