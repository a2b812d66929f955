"""Evidence assembly: run every analysis once and label what it produced.

``build_evidence`` is the single place the model adapter and the
explanation engine are invoked.  The result is an
:class:`EvidenceBundle` whose artifacts carry stable identifiers and an
:class:`~reflect_machine.taxonomy.EvidenceKind` each; fired questions
reference artifacts by identifier, which is what makes their provenance
auditable.

Stages degrade instead of failing: a case with missing values still yields
data-quality findings, but prediction and everything downstream of it are
skipped and listed under ``skipped``.  Genuine errors inside a stage are
wrapped in :class:`~reflect_machine.errors.StageError` with the stage name.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field, replace

from .errors import ReflectError, SchemaError, StageError
from .explain import (
    Attribution,
    Counterfactual,
    DisagreementReport,
    PDCurve,
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
    CaseInstance,
    CaseValidationReport,
    Datasheet,
    DatasheetFinding,
    MetadataConfig,
    ModelCard,
    OutlierReport,
    Recommendation,
    TabularModel,
    datasheet_findings,
    distribution_report,
    predict,
    validate_case,
)
from .taxonomy import EvidenceKind


@dataclass(frozen=True)
class TriggerConfig:
    """Knobs for evidence building and trigger firing."""

    top_k: int = 3
    alt_margin: float = 0.15
    prox_frac: float = 0.10
    err_threshold: float = 0.05
    cf_grid_steps: int = 11
    cf_max_changed: int = 2
    prox_search_frac: float = 0.5
    shapley_cap: int = 15
    metadata: MetadataConfig = field(default_factory=MetadataConfig)
    as_of: _dt.date | None = None

    def validate(self) -> None:
        if self.top_k < 1:
            raise SchemaError("top_k must be at least 1")
        for name in ("alt_margin", "prox_frac", "err_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SchemaError(f"{name} must lie in [0, 1]")
        if self.cf_grid_steps < 1 or self.cf_max_changed < 1:
            raise SchemaError("counterfactual grid knobs must be positive")
        if not 0.0 < self.prox_search_frac <= 1.0:
            raise SchemaError("prox_search_frac must lie in (0, 1]")
        if self.shapley_cap < 1:
            raise SchemaError("shapley_cap must be positive")
        self.metadata.validate()

    def to_dict(self) -> dict:
        return {
            "top_k": self.top_k,
            "alt_margin": self.alt_margin,
            "prox_frac": self.prox_frac,
            "err_threshold": self.err_threshold,
            "cf_grid_steps": self.cf_grid_steps,
            "cf_max_changed": self.cf_max_changed,
            "prox_search_frac": self.prox_search_frac,
            "shapley_cap": self.shapley_cap,
            "metadata": {
                "z_out": self.metadata.z_out,
                "rare_frac": self.metadata.rare_frac,
                "stale_years": self.metadata.stale_years,
                "min_sample": self.metadata.min_sample,
                "imbalance_frac": self.metadata.imbalance_frac,
            },
            "as_of": self.as_of.isoformat() if self.as_of else None,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "TriggerConfig":
        md = raw.get("metadata", {})
        cfg = cls(
            top_k=int(raw.get("top_k", 3)),
            alt_margin=float(raw.get("alt_margin", 0.15)),
            prox_frac=float(raw.get("prox_frac", 0.10)),
            err_threshold=float(raw.get("err_threshold", 0.05)),
            cf_grid_steps=int(raw.get("cf_grid_steps", 11)),
            cf_max_changed=int(raw.get("cf_max_changed", 2)),
            prox_search_frac=float(raw.get("prox_search_frac", 0.5)),
            shapley_cap=int(raw.get("shapley_cap", 15)),
            metadata=MetadataConfig(
                z_out=float(md.get("z_out", 2.0)),
                rare_frac=float(md.get("rare_frac", 0.05)),
                stale_years=float(md.get("stale_years", 5.0)),
                min_sample=int(md.get("min_sample", 100)),
                imbalance_frac=float(md.get("imbalance_frac", 0.10)),
            ),
            as_of=_dt.date.fromisoformat(raw["as_of"]) if raw.get("as_of") else None,
        )
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class EvidenceItem:
    kind: EvidenceKind
    payload: dict

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "payload": self.payload}


@dataclass(frozen=True)
class EvidenceBundle:
    case: CaseInstance
    case_report: CaseValidationReport
    outliers: OutlierReport | None
    findings: tuple[DatasheetFinding, ...]
    recommendation: Recommendation | None
    shapley: Attribution | None
    occlusion: Attribution | None
    disagreement: DisagreementReport | None
    counterfactuals_any: tuple[Counterfactual, ...]
    counterfactuals_mutable: tuple[Counterfactual, ...]
    proximity: ProximityReport | None
    global_imp: Attribution | None
    pd: PDCurve | None
    model_card: ModelCard | None
    skipped: tuple[str, ...]
    as_of: _dt.date
    evidence: dict[str, EvidenceItem]

    def evidence_json(self) -> dict:
        return {eid: item.to_dict() for eid, item in self.evidence.items()}


def _run(stage: str, fn):
    try:
        return fn()
    except ReflectError as exc:
        raise StageError(stage, exc) from exc


def build_evidence(
    model: TabularModel,
    case: CaseInstance,
    datasheet: Datasheet | None = None,
    model_card: ModelCard | None = None,
    background: list[dict] | None = None,
    cfg: TriggerConfig | None = None,
) -> EvidenceBundle:
    """Run each analysis exactly once and assemble the labeled bundle.

    Datasheet, model card, and background are optional; stages that need an
    absent ingredient (or a complete case, when values are missing) are
    skipped and recorded by name rather than raising.
    """
    cfg = cfg or TriggerConfig()
    cfg.validate()
    as_of = cfg.as_of or _dt.date.today()
    skipped: list[str] = []

    case_report = _run("validate", lambda: validate_case(model, case))

    outliers = None
    findings: tuple[DatasheetFinding, ...] = ()
    if datasheet is not None:
        outliers = _run(
            "distribution", lambda: distribution_report(datasheet, case, cfg.metadata))
        findings = _run(
            "datasheet", lambda: datasheet_findings(datasheet, cfg.metadata, now=as_of))
    else:
        skipped += ["distribution", "datasheet"]

    missing = case.missing_features(model)
    recommendation = None
    shap = occl = disagreement = proximity = None
    cf_any: tuple[Counterfactual, ...] = ()
    cf_mutable: tuple[Counterfactual, ...] = ()
    glob = None
    pd = None

    if missing:
        skipped += ["predict", "shapley", "occlusion", "disagreement",
                    "counterfactuals", "proximity", "global_importance",
                    "partial_dependence"]
    else:
        recommendation = _run("predict", lambda: predict(model, case))

        if background:
            shap = _run("shapley", lambda: shapley_exact(
                model, case, background, cap=cfg.shapley_cap))
            occl = _run("occlusion", lambda: occlusion(model, case, background))
            disagreement = _run("disagreement", lambda: rank_disagreement(shap, occl))
            glob = _run("global_importance", lambda: global_importance(
                model, background, cap=cfg.shapley_cap))
            # sweep the most influential numeric feature, if there is one
            numeric = [s.name for s in model.schema if s.kind == "numeric"]
            if numeric:
                sweep = min(numeric, key=lambda n: (-abs(shap.values[n]), n))
                pd = _run("partial_dependence", lambda: partial_dependence(
                    model, sweep, background, grid_steps=cfg.cf_grid_steps))
            else:
                skipped.append("partial_dependence")
        else:
            skipped += ["shapley", "occlusion", "disagreement",
                        "global_importance", "partial_dependence"]

        targets = [l for l in model.outcome_labels if l != recommendation.predicted]
        any_hits: list[Counterfactual] = []
        mut_hits: list[Counterfactual] = []
        for target in targets:
            any_hits.extend(_run("counterfactuals", lambda t=target: counterfactual_search(
                model, case, t, grid_steps=cfg.cf_grid_steps,
                max_changed=cfg.cf_max_changed, mutable_only=False)))
            mut_hits.extend(_run("counterfactuals", lambda t=target: counterfactual_search(
                model, case, t, grid_steps=cfg.cf_grid_steps,
                max_changed=cfg.cf_max_changed, mutable_only=True)))
        cf_any, cf_mutable = tuple(any_hits), tuple(mut_hits)

        proximity = _run("proximity", lambda: boundary_proximity(
            model, case, search_frac=cfg.prox_search_frac))

    bundle = EvidenceBundle(
        case=case, case_report=case_report, outliers=outliers, findings=findings,
        recommendation=recommendation, shapley=shap, occlusion=occl,
        disagreement=disagreement, counterfactuals_any=cf_any,
        counterfactuals_mutable=cf_mutable, proximity=proximity, global_imp=glob,
        pd=pd, model_card=model_card, skipped=tuple(skipped), as_of=as_of,
        evidence={},
    )
    return replace(bundle, evidence=_collect_items(bundle))


def _collect_items(b: EvidenceBundle) -> dict[str, EvidenceItem]:
    items: dict[str, EvidenceItem] = {}
    items["input-data"] = EvidenceItem(EvidenceKind.INPUT_DATA, b.case.to_dict())
    items["case-report"] = EvidenceItem(EvidenceKind.INPUT_DATA, b.case_report.to_dict())
    if b.outliers is not None:
        for entry in b.outliers.entries:
            items[f"outlier:{entry.feature}"] = EvidenceItem(
                EvidenceKind.DATASHEET_FINDING, entry.to_dict())
    for f in b.findings:
        if f.kind == "stale":
            eid = "datasheet:stale"
        elif f.kind == "small_sample":
            eid = "datasheet:small-sample"
        elif f.kind == "imbalance":
            eid = f"datasheet:subgroup:{f.subgroup}"
        else:
            eid = f"datasheet:missing-factor:{f.factor}"
        items[eid] = EvidenceItem(EvidenceKind.DATASHEET_FINDING, f.to_dict())
    if b.recommendation is not None:
        items["recommendation"] = EvidenceItem(
            EvidenceKind.CONTEXTUAL_INFO, b.recommendation.to_dict())
    if b.shapley is not None:
        items["attr:shapley"] = EvidenceItem(
            EvidenceKind.FEATURE_CONTRIBUTION, b.shapley.to_dict())
    if b.occlusion is not None:
        items["attr:occlusion"] = EvidenceItem(
            EvidenceKind.FEATURE_CONTRIBUTION, b.occlusion.to_dict())
    if b.disagreement is not None:
        items["disagreement"] = EvidenceItem(
            EvidenceKind.ATTRIBUTION_DISAGREEMENT, b.disagreement.to_dict())
    for i, cf in enumerate(b.counterfactuals_any):
        items[f"cf:any:{i}"] = EvidenceItem(EvidenceKind.COUNTERFACTUAL, cf.to_dict())
    for i, cf in enumerate(b.counterfactuals_mutable):
        items[f"cf:mutable:{i}"] = EvidenceItem(EvidenceKind.COUNTERFACTUAL, cf.to_dict())
    if b.proximity is not None:
        for entry in b.proximity.entries:
            items[f"proximity:{entry.feature}"] = EvidenceItem(
                EvidenceKind.BOUNDARY_PROXIMITY, entry.to_dict())
    if b.global_imp is not None:
        items["global-importance"] = EvidenceItem(
            EvidenceKind.GLOBAL_IMPORTANCE, b.global_imp.to_dict())
    if b.pd is not None:
        items[f"pd:{b.pd.feature}"] = EvidenceItem(
            EvidenceKind.PARTIAL_DEPENDENCE, b.pd.to_dict())
    if b.model_card is not None:
        items["model-card:error-rate"] = EvidenceItem(
            EvidenceKind.MODEL_CARD_FACT, {"error_rate": b.model_card.error_rate})
        for i, lim in enumerate(b.model_card.limitations):
            items[f"model-card:limitation:{i}"] = EvidenceItem(
                EvidenceKind.MODEL_CARD_FACT,
                {"text": lim.text, "applies_tags": list(lim.applies_tags)})
    items["stakeholder-prefs"] = EvidenceItem(
        EvidenceKind.STAKEHOLDER_CONTEXT, dict(b.case.stakeholder_prefs))
    if b.case.operator_prior is not None:
        items["operator-prior"] = EvidenceItem(
            EvidenceKind.OPERATOR_PRIOR, {"label": b.case.operator_prior})
    return items
