"""Desk-scale explanation artifacts for the supported model forms.

Everything here is exact or exhaustive rather than sampled: coalition
enumeration for Shapley values, full grid search for counterfactuals,
bracketed bisection for decision-limit probes.  That is affordable because
the models are small (the enumeration refuses beyond a feature cap) and it
buys determinism: identical inputs give identical artifacts, which the
session log relies on.

All attribution targets the model's raw score.  Accumulations use
``math.fsum`` so results do not depend on summation order; this also makes
the symmetry and dummy properties hold exactly in floating point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    FeatureSetMismatch,
    IncompleteBackground,
    MissingFeature,
    NotNumeric,
    TargetError,
    TooManyFeatures,
)
from .model import MISSING, CaseInstance, TabularModel, predict

#: refuse exact enumeration beyond this many features
SHAPLEY_CAP = 15

#: bisection stops when the bracket is this fraction of the feature range
PROXIMITY_RESOLUTION = 1e-6

#: coarse samples per direction used to bracket a flip before bisecting
_PROXIMITY_SCAN = 64


@dataclass(frozen=True)
class Attribution:
    method: str  # "shapley" | "occlusion"
    values: dict[str, float]
    baseline_value: float

    def to_dict(self) -> dict:
        return {"method": self.method, "values": dict(self.values),
                "baseline_value": self.baseline_value}


@dataclass(frozen=True)
class DisagreementReport:
    top_a: str
    top_b: str
    top1_differs: bool
    pair: tuple[str, str] | None

    def to_dict(self) -> dict:
        return {"top_a": self.top_a, "top_b": self.top_b,
                "top1_differs": self.top1_differs,
                "pair": list(self.pair) if self.pair else None}


@dataclass(frozen=True)
class Counterfactual:
    changes: dict
    distance: float
    achieved: str

    def to_dict(self) -> dict:
        return {"changes": dict(self.changes), "distance": self.distance,
                "achieved": self.achieved}


@dataclass(frozen=True)
class PDCurve:
    feature: str
    grid: tuple[float, ...]
    means: tuple[float, ...]

    def to_dict(self) -> dict:
        return {"feature": self.feature, "grid": list(self.grid),
                "means": list(self.means)}


@dataclass(frozen=True)
class ProximityEntry:
    feature: str
    flip_delta: float | None  # numeric features: signed delta; else None
    new_value: object
    new_outcome: str

    def to_dict(self) -> dict:
        return {"feature": self.feature, "flip_delta": self.flip_delta,
                "new_value": self.new_value, "new_outcome": self.new_outcome}


@dataclass(frozen=True)
class ProximityReport:
    base_outcome: str
    entries: tuple[ProximityEntry, ...]

    def entry_for(self, feature: str) -> ProximityEntry | None:
        for e in self.entries:
            if e.feature == feature:
                return e
        return None

    def to_dict(self) -> dict:
        return {"base_outcome": self.base_outcome,
                "entries": [e.to_dict() for e in self.entries]}


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _require_complete_case(model: TabularModel, case: CaseInstance) -> dict:
    values = {}
    for s in model.schema:
        v = case.values.get(s.name, MISSING)
        if v is MISSING:
            raise MissingFeature(s.name)
        values[s.name] = v
    return values


def _require_complete_background(model: TabularModel, background: list[dict]) -> list[dict]:
    if not background:
        raise IncompleteBackground("background must contain at least one row")
    rows = []
    for i, row in enumerate(background):
        clean = {}
        for s in model.schema:
            v = row.get(s.name, MISSING)
            if v is MISSING or v is None:
                raise IncompleteBackground(f"background row {i} is missing '{s.name}'")
            clean[s.name] = v
        rows.append(clean)
    return rows


# ---------------------------------------------------------------------------
# Attribution
# ---------------------------------------------------------------------------

def shapley_exact(model: TabularModel, case: CaseInstance, background: list[dict],
                  cap: int = SHAPLEY_CAP) -> Attribution:
    """Exact Shapley values of the raw score by coalition enumeration.

    The value of a coalition is the mean score over the background after
    replacing the coalition's features with the case's values.  Raises
    :class:`TooManyFeatures` beyond ``cap`` features (2^n coalitions).
    """
    names = model.feature_names
    n = len(names)
    if n > cap:
        raise TooManyFeatures(n, cap)
    case_values = _require_complete_case(model, case)
    rows = _require_complete_background(model, background)
    b = len(rows)

    # v[mask]: mean score with the masked features pinned to the case.
    v = [0.0] * (1 << n)
    for mask in range(1 << n):
        scores = []
        for row in rows:
            composed = {
                name: (case_values[name] if mask >> i & 1 else row[name])
                for i, name in enumerate(names)
            }
            scores.append(model.score(composed))
        v[mask] = math.fsum(scores) / b

    fact = [math.factorial(k) for k in range(n + 1)]
    coeff = [fact[s] * fact[n - 1 - s] / fact[n] for s in range(n)]

    values: dict[str, float] = {}
    for i, name in enumerate(names):
        bit = 1 << i
        terms = []
        for mask in range(1 << n):
            if mask & bit:
                continue
            terms.append(coeff[bin(mask).count("1")] * (v[mask | bit] - v[mask]))
        values[name] = math.fsum(terms)
    return Attribution(method="shapley", values=values, baseline_value=v[0])


def occlusion(model: TabularModel, case: CaseInstance,
              background: list[dict]) -> Attribution:
    """Occlusion attribution: score drop when one feature is resampled.

    value_i = score(case) - mean over background of score(case with the
    i-th feature replaced by the background row's value).  Agrees with
    Shapley for additive scorers, diverges under interactions.
    """
    case_values = _require_complete_case(model, case)
    rows = _require_complete_background(model, background)
    b = len(rows)
    base = model.score(case_values)
    baseline = math.fsum(model.score(row) for row in rows) / b
    values: dict[str, float] = {}
    for s in model.schema:
        occluded = []
        for row in rows:
            composed = dict(case_values)
            composed[s.name] = row[s.name]
            occluded.append(model.score(composed))
        values[s.name] = base - math.fsum(occluded) / b
    return Attribution(method="occlusion", values=values, baseline_value=baseline)


def rank_disagreement(a: Attribution, b: Attribution) -> DisagreementReport:
    """Compare the top-1 features of two attributions by |value|.

    Ties break on ascending feature name, so the report is deterministic.
    """
    if set(a.values) != set(b.values):
        raise FeatureSetMismatch(
            "attributions cover different feature sets: "
            f"{sorted(a.values)} vs {sorted(b.values)}")

    def top1(attr: Attribution) -> str:
        return min(attr.values, key=lambda k: (-abs(attr.values[k]), k))

    ta, tb = top1(a), top1(b)
    differs = ta != tb
    return DisagreementReport(top_a=ta, top_b=tb, top1_differs=differs,
                              pair=(ta, tb) if differs else None)


# ---------------------------------------------------------------------------
# Counterfactual search
# ---------------------------------------------------------------------------

def feature_grid(model: TabularModel, name: str, grid_steps: int) -> list:
    spec = model.spec(name)
    if spec.kind == "categorical":
        return list(spec.categories)
    if grid_steps < 1:
        raise TargetError("grid_steps must be at least 1")
    return [float(x) for x in np.linspace(spec.range[0], spec.range[1], grid_steps)]


def change_distance(model: TabularModel, case_values: dict, changes: dict) -> float:
    """L1 over range-normalized numeric changes; 1 per changed categorical."""
    parts = []
    for name, new in changes.items():
        spec = model.spec(name)
        if spec.kind == "numeric":
            parts.append(abs(float(new) - float(case_values[name])) / spec.width)
        else:
            parts.append(0.0 if new == case_values[name] else 1.0)
    return math.fsum(parts)


def counterfactual_search(model: TabularModel, case: CaseInstance, target: str,
                          grid_steps: int = 11, max_changed: int = 2,
                          mutable_only: bool = False) -> list[Counterfactual]:
    """Exhaustive grid search for minimal changes reaching ``target``.

    Returns the Pareto-minimal candidates over (distance, number of changed
    features), sorted by distance, then change count, then the change set
    itself.  Empty list when the grid contains no way to reach the target.
    """
    if target not in model.outcome_labels:
        raise TargetError(f"unknown target label '{target}'")
    case_values = _require_complete_case(model, case)
    if predict(model, case).predicted == target:
        raise TargetError("target equals the current prediction")

    allowed = [s.name for s in model.schema if (s.mutable or not mutable_only)]
    grids = {name: feature_grid(model, name, grid_steps) for name in allowed}

    hits: list[Counterfactual] = []
    for k in range(1, min(max_changed, len(allowed)) + 1):
        for combo in itertools.combinations(allowed, k):
            value_lists = []
            for name in combo:
                current = case_values[name]
                value_lists.append([v for v in grids[name] if v != current])
            for assignment in itertools.product(*value_lists):
                changes = dict(zip(combo, assignment))
                outcome = predict(model, case.with_changes(changes)).predicted
                if outcome == target:
                    hits.append(Counterfactual(
                        changes=changes,
                        distance=change_distance(model, case_values, changes),
                        achieved=target,
                    ))

    # Pareto filter over (distance, change count)
    kept = []
    for c in hits:
        dominated = any(
            (d.distance <= c.distance and len(d.changes) <= len(c.changes)
             and (d.distance < c.distance or len(d.changes) < len(c.changes)))
            for d in hits
        )
        if not dominated:
            kept.append(c)

    def sort_key(c: Counterfactual):
        return (c.distance, len(c.changes),
                tuple(sorted((k, str(v)) for k, v in c.changes.items())))

    return sorted(kept, key=sort_key)


# ---------------------------------------------------------------------------
# Partial dependence
# ---------------------------------------------------------------------------

def partial_dependence(model: TabularModel, feature: str, background: list[dict],
                       grid_steps: int = 11) -> PDCurve:
    """Mean raw score over the background as one numeric feature sweeps
    its range."""
    spec = model.spec(feature)
    if spec.kind != "numeric":
        raise NotNumeric(f"partial dependence needs a numeric feature, got '{feature}'")
    rows = _require_complete_background(model, background)
    grid = feature_grid(model, feature, grid_steps)
    means = []
    for g in grid:
        scores = []
        for row in rows:
            composed = dict(row)
            composed[feature] = g
            scores.append(model.score(composed))
        means.append(math.fsum(scores) / len(rows))
    return PDCurve(feature=feature, grid=tuple(grid), means=tuple(means))


# ---------------------------------------------------------------------------
# Decision-limit proximity
# ---------------------------------------------------------------------------

def boundary_proximity(model: TabularModel, case: CaseInstance,
                       search_frac: float = 0.5,
                       resolution: float = PROXIMITY_RESOLUTION) -> ProximityReport:
    """Per-feature smallest change that flips the prediction.

    Numeric features: the probe interval is ±``search_frac`` of the range
    around the case value, clipped to the legal range; a coarse scan
    brackets the first flip in each direction and bisection narrows it to
    ``resolution`` of the range.  Categorical features: the first category
    in declared order that flips.  Features that cannot flip within the
    probe are absent from the report.
    """
    case_values = _require_complete_case(model, case)
    base = predict(model, case).predicted
    entries: list[ProximityEntry] = []

    for spec in model.schema:
        if spec.kind == "categorical":
            for cat in spec.categories:
                if cat == case_values[spec.name]:
                    continue
                out = predict(model, case.with_changes({spec.name: cat})).predicted
                if out != base:
                    entries.append(ProximityEntry(feature=spec.name, flip_delta=None,
                                                  new_value=cat, new_outcome=out))
                    break
            continue

        x0 = float(case_values[spec.name])
        eps = resolution * spec.width
        best: tuple[float, str] | None = None
        for sign in (1.0, -1.0):
            room = (spec.range[1] - x0) if sign > 0 else (x0 - spec.range[0])
            limit = min(search_frac * spec.width, room)
            if limit <= 0:
                continue
            delta = _first_flip(model, case, spec.name, x0, sign, limit, eps, base)
            if delta is None:
                continue
            if (best is None or abs(delta) < abs(best[0])
                    or (abs(delta) == abs(best[0]) and delta > best[0])):
                out = predict(model, case.with_changes({spec.name: x0 + delta})).predicted
                best = (delta, out)
        if best is not None:
            entries.append(ProximityEntry(feature=spec.name, flip_delta=best[0],
                                          new_value=x0 + best[0], new_outcome=best[1]))
    return ProximityReport(base_outcome=base, entries=tuple(entries))


def _first_flip(model: TabularModel, case: CaseInstance, name: str, x0: float,
                sign: float, limit: float, eps: float, base: str) -> float | None:
    def flips(mag: float) -> bool:
        out = predict(model, case.with_changes({name: x0 + sign * mag})).predicted
        return out != base

    # coarse scan to bracket the first flip (trees are not monotone)
    lo = 0.0
    hi = None
    for k in range(1, _PROXIMITY_SCAN + 1):
        mag = limit * k / _PROXIMITY_SCAN
        if flips(mag):
            hi = mag
            break
        lo = mag
    if hi is None:
        return None
    while hi - lo > eps:
        mid = (lo + hi) / 2.0
        if flips(mid):
            hi = mid
        else:
            lo = mid
    return sign * hi


# ---------------------------------------------------------------------------
# Global importance
# ---------------------------------------------------------------------------

def global_importance(model: TabularModel, background: list[dict],
                      cap: int = SHAPLEY_CAP) -> Attribution:
    """Mean |Shapley value| per feature with each background row as the case.

    Packaged as an :class:`Attribution` whose method stays ``"shapley"``
    (the magnitudes come from exact Shapley runs); ``baseline_value`` is the
    mean background score, the shared baseline of every per-row run.
    """
    rows = _require_complete_background(model, background)
    totals: dict[str, list[float]] = {name: [] for name in model.feature_names}
    for row in rows:
        attr = shapley_exact(model, CaseInstance(values=dict(row)), rows, cap=cap)
        for name, val in attr.values.items():
            totals[name].append(abs(val))
    baseline = math.fsum(model.score(row) for row in rows) / len(rows)
    return Attribution(
        method="shapley",
        values={name: math.fsum(vals) / len(rows) for name, vals in totals.items()},
        baseline_value=baseline,
    )
