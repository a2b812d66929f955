"""Desk-scale tabular models and the documents that describe them.

This module parses and evaluates the decision models the questions are asked
about.  Two forms are supported, both producing a single real score:

``linear``
    weighted sum of numeric features plus an intercept, compared against a
    decision threshold.

``tree``
    a node-list decision tree; numeric nodes send a row left when the value
    is strictly below the split value, categorical nodes when it equals it.
    Leaves hold the score.

Scores are squashed through a logistic around the threshold to yield a score
per outcome label.  Models carry exactly two outcome labels; by convention
``outcome_labels[0]`` is the label awarded when the raw score reaches the
decision threshold.  Prediction is argmax with ties going to the first
label, which makes the two readings agree.

Missing values are explicit: a case field set to ``MISSING`` (JSON ``null``)
is never imputed.  Prediction refuses to run when a feature the model
actually reads is missing.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import dataclass, field, replace

from .errors import MissingFeature, ParseError, SchemaError


class _Missing:
    """Singleton marker for an explicitly missing value."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MISSING"

    def __deepcopy__(self, memo):
        return self


MISSING = _Missing()


@dataclass(frozen=True)
class FeatureSpec:
    """One input column: numeric with a closed range, or categorical."""

    name: str
    kind: str  # "numeric" | "categorical"
    range: tuple[float, float] | None = None
    categories: tuple[str, ...] | None = None
    unit: str = ""
    mutable: bool = True

    @property
    def width(self) -> float:
        assert self.kind == "numeric" and self.range is not None
        return self.range[1] - self.range[0]

    def to_dict(self) -> dict:
        d: dict = {"name": self.name, "kind": self.kind, "unit": self.unit,
                   "mutable": self.mutable}
        if self.kind == "numeric":
            d["range"] = list(self.range)
        else:
            d["categories"] = list(self.categories)
        return d


@dataclass(frozen=True)
class TreeNode:
    feature: str | None = None
    value: object = None
    left: int | None = None
    right: int | None = None
    leaf: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.leaf is not None


@dataclass(frozen=True)
class TabularModel:
    schema: tuple[FeatureSpec, ...]
    form: str  # "linear" | "tree"
    outcome_labels: tuple[str, ...]
    weights: dict[str, float] | None = None
    intercept: float = 0.0
    threshold: float = 0.0
    nodes: tuple[TreeNode, ...] = ()

    def spec(self, name: str) -> FeatureSpec:
        for s in self.schema:
            if s.name == name:
                return s
        raise SchemaError(f"unknown feature '{name}'")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.schema)

    def reads(self, case: "CaseInstance") -> tuple[str, ...]:
        """Features the model actually consults for this case.

        Linear models read every feature with a nonzero weight; trees read
        the features on the root-to-leaf path of the case, which may require
        values as it goes.
        """
        if self.form == "linear":
            return tuple(s.name for s in self.schema if self.weights.get(s.name, 0.0) != 0.0)
        read: list[str] = []
        node = self.nodes[0]
        while not node.is_leaf:
            read.append(node.feature)
            v = case.values.get(node.feature, MISSING)
            if v is MISSING:
                break
            node = self.nodes[node.left if self._goes_left(node, v) else node.right]
        return tuple(read)

    def _goes_left(self, node: TreeNode, value) -> bool:
        if self.spec(node.feature).kind == "numeric":
            return float(value) < float(node.value)
        return value == node.value

    def score(self, values: dict) -> float:
        """Raw scalar score for a complete assignment of feature values."""
        if self.form == "linear":
            return math.fsum(
                self.weights.get(s.name, 0.0) * float(values[s.name])
                for s in self.schema
            ) + self.intercept
        node = self.nodes[0]
        while not node.is_leaf:
            v = values[node.feature]
            if v is MISSING:
                raise MissingFeature(node.feature)
            node = self.nodes[node.left if self._goes_left(node, v) else node.right]
        return node.leaf

    def to_dict(self) -> dict:
        d: dict = {
            "schema": [s.to_dict() for s in self.schema],
            "outcome_labels": list(self.outcome_labels),
        }
        if self.form == "linear":
            d["form"] = {"type": "linear", "weights": dict(self.weights),
                         "intercept": self.intercept, "threshold": self.threshold}
        else:
            nodes = []
            for n in self.nodes:
                if n.is_leaf:
                    nodes.append({"leaf": n.leaf})
                else:
                    nodes.append({"feature": n.feature, "value": n.value,
                                  "left": n.left, "right": n.right})
            d["form"] = {"type": "tree", "nodes": nodes, "threshold": self.threshold}
        return d


@dataclass(frozen=True)
class CaseInstance:
    """One decision case: feature values plus its human context."""

    values: dict
    context_tags: tuple[str, ...] = ()
    stakeholder_prefs: dict = field(default_factory=dict)
    operator_prior: str | None = None

    def missing_features(self, model: TabularModel) -> tuple[str, ...]:
        out = []
        for s in model.schema:
            v = self.values.get(s.name, MISSING)
            if v is MISSING:
                out.append(s.name)
        return tuple(out)

    def with_changes(self, changes: dict) -> "CaseInstance":
        new_values = dict(self.values)
        new_values.update(changes)
        return replace(self, values=new_values)

    def to_dict(self) -> dict:
        return {
            "values": {k: (None if v is MISSING else v) for k, v in self.values.items()},
            "context_tags": list(self.context_tags),
            "stakeholder_prefs": dict(self.stakeholder_prefs),
            "operator_prior": self.operator_prior,
        }


@dataclass(frozen=True)
class Recommendation:
    predicted: str
    scores: dict[str, float]
    margin: float

    @property
    def runner_up(self) -> str:
        ordered = sorted(self.scores.items(), key=lambda kv: (-kv[1], list(self.scores).index(kv[0])))
        return ordered[1][0]

    def to_dict(self) -> dict:
        return {"predicted": self.predicted, "scores": dict(self.scores),
                "margin": self.margin}


@dataclass(frozen=True)
class Datasheet:
    sample_size: int
    collection_start: _dt.date
    collection_end: _dt.date
    provenance: str = ""
    per_feature: dict = field(default_factory=dict)
    subgroup_counts: dict = field(default_factory=dict)
    known_missing_factors: tuple[str, ...] = ()


@dataclass(frozen=True)
class ModelCardLimitation:
    text: str
    applies_tags: tuple[str, ...] = ()


@dataclass(frozen=True)
class ModelCard:
    error_rate: float
    intended_use: str = ""
    limitations: tuple[ModelCardLimitation, ...] = ()


@dataclass(frozen=True)
class MetadataConfig:
    """Thresholds for the data-quality checks."""

    z_out: float = 2.0
    rare_frac: float = 0.05
    stale_years: float = 5.0
    min_sample: int = 100
    imbalance_frac: float = 0.10

    def validate(self) -> None:
        if not 0.0 <= self.rare_frac <= 1.0 or not 0.0 <= self.imbalance_frac <= 1.0:
            raise SchemaError("fractions must lie in [0, 1]")
        if self.z_out <= 0 or self.stale_years < 0 or self.min_sample < 0:
            raise SchemaError("thresholds must be non-negative (z_out positive)")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _parse_feature(raw: dict, index: int) -> FeatureSpec:
    if not isinstance(raw, dict):
        raise ParseError(f"feature #{index} is not an object")
    name = raw.get("name")
    kind = raw.get("kind")
    if not isinstance(name, str) or not name:
        raise ParseError(f"feature #{index} has no name")
    if kind not in ("numeric", "categorical"):
        raise ParseError(f"feature '{name}': kind must be numeric or categorical")
    unit = raw.get("unit", "")
    mutable = bool(raw.get("mutable", True))
    if kind == "numeric":
        rng = raw.get("range")
        if (not isinstance(rng, list) or len(rng) != 2
                or not all(isinstance(x, (int, float)) for x in rng)):
            raise ParseError(f"feature '{name}': numeric features need a [min, max] range")
        lo, hi = float(rng[0]), float(rng[1])
        if not lo < hi:
            raise SchemaError(f"feature '{name}': range must satisfy min < max")
        return FeatureSpec(name=name, kind=kind, range=(lo, hi), unit=unit, mutable=mutable)
    cats = raw.get("categories")
    if not isinstance(cats, list) or not cats or not all(isinstance(c, str) for c in cats):
        raise ParseError(f"feature '{name}': categorical features need a category list")
    if len(set(cats)) != len(cats):
        raise SchemaError(f"feature '{name}': duplicate categories")
    return FeatureSpec(name=name, kind=kind, categories=tuple(cats), unit=unit, mutable=mutable)


def _validate_tree(nodes: tuple[TreeNode, ...], schema: tuple[FeatureSpec, ...]) -> None:
    names = {s.name: s for s in schema}
    n = len(nodes)
    for i, node in enumerate(nodes):
        if node.is_leaf:
            continue
        if node.feature not in names:
            raise SchemaError(f"tree node {i} splits on unknown feature '{node.feature}'")
        spec = names[node.feature]
        if spec.kind == "numeric" and not isinstance(node.value, (int, float)):
            raise SchemaError(f"tree node {i}: numeric split needs a numeric value")
        if spec.kind == "categorical" and node.value not in spec.categories:
            raise SchemaError(f"tree node {i}: split value not among categories")
        for child in (node.left, node.right):
            if not isinstance(child, int) or not 0 <= child < n:
                raise SchemaError(f"tree node {i}: child index out of range")
    # every path from the root must terminate at a leaf without revisiting
    seen: set[int] = set()
    stack = [0]
    while stack:
        i = stack.pop()
        if i in seen:
            raise SchemaError("tree contains a cycle")
        seen.add(i)
        node = nodes[i]
        if not node.is_leaf:
            stack.extend((node.left, node.right))


def parse_model_spec(document: str | bytes | dict) -> TabularModel:
    """Parse a model document; raises ParseError/SchemaError on bad input."""
    raw = _as_object(document, "model spec")
    if "schema" not in raw or "form" not in raw or "outcome_labels" not in raw:
        raise ParseError("model spec needs schema, form, and outcome_labels")
    schema_raw = raw["schema"]
    if not isinstance(schema_raw, list) or not schema_raw:
        raise ParseError("schema must be a non-empty feature list")
    schema = tuple(_parse_feature(f, i) for i, f in enumerate(schema_raw))
    if len({s.name for s in schema}) != len(schema):
        raise SchemaError("duplicate feature names in schema")

    labels = raw["outcome_labels"]
    if (not isinstance(labels, list) or len(labels) < 2
            or not all(isinstance(l, str) for l in labels)):
        raise ParseError("outcome_labels must list at least two labels")
    if len(labels) != 2:
        raise SchemaError("scalar-score forms support exactly two outcome labels")
    if len(set(labels)) != 2:
        raise SchemaError("outcome labels must be distinct")

    form = raw["form"]
    if not isinstance(form, dict) or form.get("type") not in ("linear", "tree"):
        raise ParseError("form.type must be 'linear' or 'tree'")

    if form["type"] == "linear":
        weights = form.get("weights")
        if not isinstance(weights, dict):
            raise ParseError("linear form needs a weights map")
        for name in weights:
            spec = next((s for s in schema if s.name == name), None)
            if spec is None:
                raise SchemaError(f"weight for unknown feature '{name}'")
            if spec.kind != "numeric":
                raise SchemaError("linear form supports numeric features only")
        return TabularModel(
            schema=schema, form="linear", outcome_labels=tuple(labels),
            weights={k: float(v) for k, v in weights.items()},
            intercept=float(form.get("intercept", 0.0)),
            threshold=float(form.get("threshold", 0.0)),
        )

    nodes_raw = form.get("nodes")
    if not isinstance(nodes_raw, list) or not nodes_raw:
        raise ParseError("tree form needs a non-empty node list")
    nodes = []
    for i, nr in enumerate(nodes_raw):
        if not isinstance(nr, dict):
            raise ParseError(f"tree node {i} is not an object")
        if "leaf" in nr:
            nodes.append(TreeNode(leaf=float(nr["leaf"])))
        else:
            nodes.append(TreeNode(feature=nr.get("feature"), value=nr.get("value"),
                                  left=nr.get("left"), right=nr.get("right")))
    nodes = tuple(nodes)
    _validate_tree(nodes, schema)
    return TabularModel(
        schema=schema, form="tree", outcome_labels=tuple(labels),
        nodes=nodes, threshold=float(form.get("threshold", 0.0)),
    )


def parse_case(document: str | bytes | dict, model: TabularModel | None = None) -> CaseInstance:
    """Parse a case document.  JSON null marks an explicitly missing value."""
    raw = _as_object(document, "case")
    values_raw = raw.get("values")
    if not isinstance(values_raw, dict):
        raise ParseError("case needs a values map")
    values = {k: (MISSING if v is None else v) for k, v in values_raw.items()}
    if model is not None:
        unknown = sorted(set(values) - set(model.feature_names))
        if unknown:
            raise SchemaError(f"case contains unknown features: {', '.join(unknown)}")
    prefs = raw.get("stakeholder_prefs", {})
    if not isinstance(prefs, dict):
        raise ParseError("stakeholder_prefs must be a map")
    tags = raw.get("context_tags", [])
    if not isinstance(tags, list):
        raise ParseError("context_tags must be a list")
    prior = raw.get("operator_prior")
    if prior is not None and not isinstance(prior, str):
        raise ParseError("operator_prior must be a string label")
    return CaseInstance(values=values, context_tags=tuple(tags),
                        stakeholder_prefs=dict(prefs), operator_prior=prior)


def parse_datasheet(document: str | bytes | dict) -> Datasheet:
    raw = _as_object(document, "datasheet")
    try:
        size = int(raw["sample_size"])
        start = _dt.date.fromisoformat(raw["collection_start"])
        end = _dt.date.fromisoformat(raw["collection_end"])
    except KeyError as exc:
        raise ParseError(f"datasheet missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ParseError(f"datasheet field malformed: {exc}") from None
    if size <= 0:
        raise SchemaError("sample_size must be positive")
    if end < start:
        raise SchemaError("collection_end precedes collection_start")
    subgroups = dict(raw.get("subgroup_counts", {}))
    for name, count in subgroups.items():
        if not isinstance(count, int) or count < 0:
            raise SchemaError(f"subgroup '{name}' count must be a non-negative integer")
    if sum(subgroups.values()) > size:
        raise SchemaError("subgroup counts exceed sample_size")
    return Datasheet(
        sample_size=size, collection_start=start, collection_end=end,
        provenance=str(raw.get("provenance", "")),
        per_feature=dict(raw.get("per_feature", {})),
        subgroup_counts=subgroups,
        known_missing_factors=tuple(raw.get("known_missing_factors", [])),
    )


def parse_model_card(document: str | bytes | dict) -> ModelCard:
    raw = _as_object(document, "model card")
    try:
        rate = float(raw["error_rate"])
    except KeyError:
        raise ParseError("model card missing error_rate") from None
    except (TypeError, ValueError):
        raise ParseError("error_rate must be a number") from None
    if not 0.0 <= rate <= 1.0:
        raise SchemaError("error_rate must lie in [0, 1]")
    lims = []
    for i, lr in enumerate(raw.get("limitations", [])):
        if isinstance(lr, str):
            lims.append(ModelCardLimitation(text=lr))
        elif isinstance(lr, dict) and isinstance(lr.get("text"), str):
            lims.append(ModelCardLimitation(text=lr["text"],
                                            applies_tags=tuple(lr.get("applies_tags", []))))
        else:
            raise ParseError(f"limitation #{i} malformed")
    return ModelCard(error_rate=rate, intended_use=str(raw.get("intended_use", "")),
                     limitations=tuple(lims))


def parse_background(document: str | bytes | list, model: TabularModel) -> list[dict]:
    """Parse background rows (a JSON array of complete value maps)."""
    if isinstance(document, (str, bytes)):
        try:
            raw = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"background is not valid JSON: {exc}") from None
    else:
        raw = document
    if not isinstance(raw, list) or not raw:
        raise ParseError("background must be a non-empty JSON array of rows")
    rows = []
    for i, row in enumerate(raw):
        if not isinstance(row, dict):
            raise ParseError(f"background row {i} is not an object")
        for s in model.schema:
            if row.get(s.name) is None:
                raise SchemaError(f"background row {i} is missing '{s.name}'")
        rows.append({s.name: row[s.name] for s in model.schema})
    return rows


def _as_object(document, what: str) -> dict:
    if isinstance(document, dict):
        return document
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ParseError(f"{what} must be a JSON object")
    return raw


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def predict(model: TabularModel, case: CaseInstance) -> Recommendation:
    """Score a case and pick the outcome label.

    Deterministic: scores come from a logistic around the decision
    threshold, prediction is argmax with ties resolved to the first label.
    Raises :class:`MissingFeature` when a feature the model reads is
    missing.
    """
    for name in model.reads(case):
        if case.values.get(name, MISSING) is MISSING:
            raise MissingFeature(name)
    values = {s.name: case.values.get(s.name, MISSING) for s in model.schema}
    # Unread missing values must not crash scoring: pin them to a neutral
    # constant that the score provably ignores.
    for s in model.schema:
        if values[s.name] is MISSING:
            values[s.name] = _neutral_value(s)
    raw = model.score(values)
    p_first = 1.0 / (1.0 + math.exp(-(raw - model.threshold)))
    scores = {model.outcome_labels[0]: p_first, model.outcome_labels[1]: 1.0 - p_first}
    predicted = max(model.outcome_labels, key=lambda l: scores[l])
    if scores[model.outcome_labels[0]] == scores[model.outcome_labels[1]]:
        predicted = model.outcome_labels[0]
    ordered = sorted(scores.values(), reverse=True)
    return Recommendation(predicted=predicted, scores=scores,
                          margin=ordered[0] - ordered[1])


def _neutral_value(spec: FeatureSpec):
    if spec.kind == "numeric":
        return spec.range[0]
    return spec.categories[0]


# ---------------------------------------------------------------------------
# Data-quality reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CaseFinding:
    kind: str  # missing | out_of_range | unknown_category | unknown_feature
    feature: str
    detail: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "feature": self.feature, "detail": self.detail}


@dataclass(frozen=True)
class CaseValidationReport:
    findings: tuple[CaseFinding, ...]

    @property
    def ok(self) -> bool:
        return not self.findings

    def to_dict(self) -> dict:
        return {"findings": [f.to_dict() for f in self.findings]}


def validate_case(model: TabularModel, case: CaseInstance) -> CaseValidationReport:
    """List everything wrong with a case against the model schema."""
    findings: list[CaseFinding] = []
    for name in sorted(set(case.values) - set(model.feature_names)):
        findings.append(CaseFinding("unknown_feature", name,
                                    f"'{name}' is not in the model schema"))
    for s in model.schema:
        v = case.values.get(s.name, MISSING)
        if v is MISSING:
            findings.append(CaseFinding("missing", s.name, f"no value recorded for '{s.name}'"))
            continue
        if s.kind == "numeric":
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                findings.append(CaseFinding("out_of_range", s.name,
                                            f"'{s.name}' must be numeric"))
            elif not s.range[0] <= float(v) <= s.range[1]:
                findings.append(CaseFinding(
                    "out_of_range", s.name,
                    f"{v} outside [{s.range[0]}, {s.range[1]}]"))
        else:
            if v not in s.categories:
                findings.append(CaseFinding(
                    "unknown_category", s.name,
                    f"'{v}' not among {', '.join(s.categories)}"))
    return CaseValidationReport(findings=tuple(findings))


@dataclass(frozen=True)
class OutlierEntry:
    feature: str
    kind: str  # zscore | rare_category
    value: object
    z: float | None = None
    mean: float | None = None
    stddev: float | None = None
    frequency: int | None = None

    def to_dict(self) -> dict:
        d: dict = {"feature": self.feature, "kind": self.kind, "value": self.value}
        if self.kind == "zscore":
            d.update({"z": self.z, "mean": self.mean, "stddev": self.stddev})
        else:
            d["frequency"] = self.frequency
        return d


@dataclass(frozen=True)
class OutlierReport:
    entries: tuple[OutlierEntry, ...]
    degenerate: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries],
                "degenerate": list(self.degenerate)}


def distribution_report(datasheet: Datasheet, case: CaseInstance,
                        cfg: MetadataConfig | None = None) -> OutlierReport:
    """Compare case values against the datasheet's per-feature statistics.

    Numeric features with positive stddev get a z-score check; categorical
    features a rare-category check.  Zero-stddev features are listed as
    degenerate and skipped.  Missing case values are skipped silently.
    """
    cfg = cfg or MetadataConfig()
    cfg.validate()
    entries: list[OutlierEntry] = []
    degenerate: list[str] = []
    for name in sorted(datasheet.per_feature):
        stats = datasheet.per_feature[name]
        v = case.values.get(name, MISSING)
        if v is MISSING:
            continue
        if "stddev" in stats:
            mean, std = float(stats["mean"]), float(stats["stddev"])
            if std <= 0.0:
                degenerate.append(name)
                continue
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                continue
            z = (float(v) - mean) / std
            if abs(z) >= cfg.z_out:
                entries.append(OutlierEntry(feature=name, kind="zscore", value=v,
                                            z=z, mean=mean, stddev=std))
        elif "frequencies" in stats:
            freq = stats["frequencies"].get(v)
            if freq is None:
                continue
            if freq < cfg.rare_frac * datasheet.sample_size:
                entries.append(OutlierEntry(feature=name, kind="rare_category",
                                            value=v, frequency=int(freq)))
    return OutlierReport(entries=tuple(entries), degenerate=tuple(degenerate))


@dataclass(frozen=True)
class DatasheetFinding:
    kind: str  # stale | small_sample | imbalance | missing_factor
    detail: str
    subgroup: str | None = None
    factor: str | None = None
    years: float | None = None
    share: float | None = None

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind, "detail": self.detail}
        if self.subgroup is not None:
            d["subgroup"] = self.subgroup
        if self.factor is not None:
            d["factor"] = self.factor
        if self.years is not None:
            d["years"] = self.years
        if self.share is not None:
            d["share"] = self.share
        return d


def datasheet_findings(datasheet: Datasheet, cfg: MetadataConfig | None = None,
                       now: _dt.date | None = None) -> tuple[DatasheetFinding, ...]:
    """Derive staleness / sample-size / balance findings from a datasheet."""
    cfg = cfg or MetadataConfig()
    cfg.validate()
    now = now or _dt.date.today()
    findings: list[DatasheetFinding] = []
    age_years = (now - datasheet.collection_end).days / 365.25
    if age_years > cfg.stale_years:
        findings.append(DatasheetFinding(
            kind="stale", years=age_years,
            detail=f"data collection ended {age_years:.1f} years before {now.isoformat()}"))
    if datasheet.sample_size < cfg.min_sample:
        findings.append(DatasheetFinding(
            kind="small_sample",
            detail=f"sample size {datasheet.sample_size} below {cfg.min_sample}"))
    for name in sorted(datasheet.subgroup_counts):
        count = int(datasheet.subgroup_counts[name])
        if count < cfg.imbalance_frac * datasheet.sample_size:
            share = count / datasheet.sample_size
            findings.append(DatasheetFinding(
                kind="imbalance", subgroup=name, share=share,
                detail=f"subgroup '{name}' is {share:.1%} of the sample"))
    for factor in datasheet.known_missing_factors:
        findings.append(DatasheetFinding(
            kind="missing_factor", factor=factor,
            detail=f"'{factor}' influences the outcome but is not in the dataset"))
    return tuple(findings)
