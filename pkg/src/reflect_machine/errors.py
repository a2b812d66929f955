"""Exception hierarchy shared across the package.

Every error raised by library code derives from :class:`ReflectError` so
callers (CLI, service) can map failures to exit codes / HTTP statuses in one
place.  Errors carry enough structure to be rendered as ``{error, message,
stage}`` bodies without string parsing.
"""

from __future__ import annotations


class ReflectError(Exception):
    """Base class for all package errors."""

    #: short machine-readable code, overridden per subclass
    code = "error"


class ParseError(ReflectError):
    """A document (JSON pack, model spec, case, ...) could not be parsed."""

    code = "parse_error"


class SchemaError(ReflectError):
    """A document parsed but violates structural rules (unknown feature,
    value out of range, wrong field type, inconsistent model form)."""

    code = "schema_error"


class InvalidTemplate(ReflectError):
    """A template pack failed validation; carries the per-template report."""

    code = "invalid_template"

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class MissingBinding(ReflectError):
    """Rendering a template found a slot with no binding."""

    code = "missing_binding"

    def __init__(self, slot: str, template_id: str = ""):
        super().__init__(f"no binding for slot '{slot}'"
                         + (f" in template '{template_id}'" if template_id else ""))
        self.slot = slot
        self.template_id = template_id


class MissingFeature(ReflectError):
    """Prediction needed a feature value that is MISSING."""

    code = "missing_feature"

    def __init__(self, name: str):
        super().__init__(f"case is missing a value for feature '{name}'")
        self.name = name


class TooManyFeatures(ReflectError):
    """Exact attribution refused: coalition enumeration capped."""

    code = "too_many_features"

    def __init__(self, count: int, cap: int):
        super().__init__(f"{count} features exceeds the exact-enumeration cap of {cap}")
        self.count = count
        self.cap = cap


class IncompleteBackground(ReflectError):
    """Background rows must be complete; one had a MISSING value."""

    code = "incomplete_background"


class NotNumeric(ReflectError):
    """Operation restricted to numeric features got a categorical one."""

    code = "not_numeric"


class TargetError(ReflectError):
    """Counterfactual target label invalid (unknown or equals current)."""

    code = "target_error"


class FeatureSetMismatch(ReflectError):
    """Two attributions were compared but cover different feature sets."""

    code = "feature_set_mismatch"


class MissingTemplate(ReflectError):
    """A firing trigger found no compatible template in the given packs."""

    code = "missing_template"

    def __init__(self, qtype: str):
        super().__init__(f"no compatible template for question type {qtype}")
        self.qtype = qtype


class StageError(ReflectError):
    """Wraps an error raised inside an evidence-pipeline stage."""

    code = "stage_error"

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class UnknownSession(ReflectError):
    """Session id not present in the store."""

    code = "unknown_session"


class SessionFinalized(ReflectError):
    """Mutation attempted on a finalized session."""

    code = "session_finalized"


class ContextUnavailable(ReflectError):
    """A what-if needs the session's pipeline context but none is attached."""

    code = "context_unavailable"


class CorruptLog(ReflectError):
    """Audit log structurally broken (seq gap, bad kind, record after
    finalized, first record not 'created')."""

    code = "corrupt_log"


class ReplayMismatch(ReflectError):
    """Replay re-derived different questions than the log recorded."""

    code = "replay_mismatch"
