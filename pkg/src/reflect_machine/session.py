"""Decision sessions: an append-only audit ledger with deterministic replay.

A session is a JSONL file of records ``{session_id, seq, kind, payload,
timestamp}``; the in-memory :class:`DecisionSession` is always *folded* from
those records, never mutated directly, so what you can read is exactly what
was logged.  Because every derived artifact (questions, evidence, what-if
results) is a deterministic function of the logged inputs, :func:`replay`
can re-run the pipeline against the original inputs and verify the log —
timestamps are the only fields excluded from comparison.

Record kinds, in the only orders a well-formed log allows:

    created            seq 0, exactly once
    questions_attached seq 1, exactly once
    answered | whatif  any number, in any order
    finalized          at most once, nothing after it

Structural damage (gaps, reordering, records after ``finalized``) raises
:class:`~reflect_machine.errors.CorruptLog`; a log that folds cleanly but
re-derives differently raises :class:`~reflect_machine.errors.ReplayMismatch`.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import secrets
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import (
    ContextUnavailable,
    CorruptLog,
    ReplayMismatch,
    SchemaError,
    SessionFinalized,
    UnknownSession,
)
from .evidence import TriggerConfig, build_evidence
from .model import (
    CaseInstance,
    Datasheet,
    ModelCard,
    TabularModel,
    parse_case,
    validate_case,
)
from .taxonomy import Taxonomy, builtin_taxonomy
from .templates import TemplatePack
from .triggers import SelectionPolicy, fire_triggers, select_questions, whatif_refire

#: environment variable naming the store directory; flag/argument wins over it
DATA_DIR_ENV = "REFLECT_DATA_DIR"
DEFAULT_DATA_DIR = "./reflect-data"

RECORD_KINDS = ("created", "questions_attached", "answered", "whatif", "finalized")


def model_hash(model: TabularModel) -> str:
    """Stable content hash of a model: sha256 over its canonical JSON."""
    canonical = json.dumps(model.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class PipelineContext:
    """Everything needed to re-derive a session's artifacts.

    The context is *not* persisted with the log; replay and what-ifs in a
    fresh process need it re-attached, and the model is checked against the
    logged ``model_ref`` hash so the wrong inputs cannot silently pass.
    """

    model: TabularModel
    packs: tuple[TemplatePack, ...]
    cfg: TriggerConfig
    policy: SelectionPolicy
    datasheet: Datasheet | None = None
    model_card: ModelCard | None = None
    background: tuple[dict, ...] = ()
    model_name: str | None = None

    @property
    def model_ref(self) -> str:
        return model_hash(self.model)


@dataclass(frozen=True)
class Record:
    session_id: str
    seq: int
    kind: str
    payload: dict
    timestamp: str

    def to_dict(self) -> dict:
        return {"session_id": self.session_id, "seq": self.seq,
                "kind": self.kind, "payload": self.payload,
                "timestamp": self.timestamp}

    @classmethod
    def from_dict(cls, raw: dict) -> "Record":
        try:
            return cls(session_id=raw["session_id"], seq=int(raw["seq"]),
                       kind=raw["kind"], payload=raw["payload"],
                       timestamp=raw["timestamp"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptLog(f"malformed record: {exc}") from None


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


@dataclass(frozen=True)
class DecisionSession:
    """Folded view of one session log."""

    session_id: str
    created_at: str
    model_name: str | None
    model_ref: str
    outcome_labels: tuple[str, ...]
    schema: tuple[dict, ...]
    case: dict
    config: dict
    policy: dict
    packs: tuple[str, ...]
    recommendation: dict | None
    questions: tuple[dict, ...]
    evidence: dict
    skipped: tuple[str, ...]
    responses: dict[int, str] = field(default_factory=dict)
    whatifs: tuple[dict, ...] = ()
    status: str = "open"
    decision: dict | None = None

    @property
    def unanswered(self) -> int:
        return len(self.questions) - len(self.responses)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "created_at": self.created_at,
            "status": self.status,
            "model_name": self.model_name,
            "model_ref": self.model_ref,
            "outcome_labels": list(self.outcome_labels),
            "schema": [dict(s) for s in self.schema],
            "case": self.case,
            "config": self.config,
            "policy": self.policy,
            "packs": list(self.packs),
            "recommendation": self.recommendation,
            "questions": [dict(q) for q in self.questions],
            "evidence": self.evidence,
            "skipped": list(self.skipped),
            "responses": {str(i): t for i, t in sorted(self.responses.items())},
            "whatifs": [dict(w) for w in self.whatifs],
            "decision": self.decision,
        }


def fold_records(records: list[Record]) -> DecisionSession:
    """Build the session view, checking the log's structure as it goes."""
    if not records:
        raise CorruptLog("empty session log")
    first = records[0]
    if first.kind != "created" or first.seq != 0:
        raise CorruptLog("log must start with a 'created' record at seq 0")
    if len(records) < 2 or records[1].kind != "questions_attached":
        raise CorruptLog("'created' must be followed by 'questions_attached'")

    p = first.payload
    session = DecisionSession(
        session_id=first.session_id,
        created_at=first.timestamp,
        model_name=p.get("model_name"),
        model_ref=p["model_ref"],
        outcome_labels=tuple(p["outcome_labels"]),
        schema=tuple(p["schema"]),
        case=p["case"],
        config=p["config"],
        policy=p["policy"],
        packs=tuple(p["packs"]),
        recommendation=p["recommendation"],
        questions=tuple(records[1].payload["questions"]),
        evidence=records[1].payload["evidence"],
        skipped=tuple(records[1].payload["skipped"]),
    )

    responses: dict[int, str] = {}
    whatifs: list[dict] = []
    decision = None
    for i, r in enumerate(records):
        if r.seq != i:
            raise CorruptLog(f"sequence gap: expected seq {i}, found {r.seq}")
        if r.session_id != session.session_id:
            raise CorruptLog(f"record {i} belongs to a different session")
        if r.kind not in RECORD_KINDS:
            raise CorruptLog(f"record {i} has unknown kind '{r.kind}'")
        if decision is not None:
            raise CorruptLog(f"record {i} appears after 'finalized'")
        if i == 0 or i == 1:
            continue
        if r.kind in ("created", "questions_attached"):
            raise CorruptLog(f"unexpected '{r.kind}' record at seq {i}")
        if r.kind == "answered":
            idx = int(r.payload["question_index"])
            if not 0 <= idx < len(session.questions):
                raise CorruptLog(f"record {i} answers question {idx}, "
                                 f"but only {len(session.questions)} exist")
            responses[idx] = str(r.payload["text"])
        elif r.kind == "whatif":
            whatifs.append(r.payload)
        elif r.kind == "finalized":
            decision = r.payload
            if decision.get("unanswered") != len(session.questions) - len(responses):
                raise CorruptLog("finalized record disagrees with the log "
                                 "about how many questions went unanswered")

    return replace(
        session,
        responses=responses,
        whatifs=tuple(whatifs),
        status="finalized" if decision is not None else "open",
        decision=decision,
    )


class SessionStore:
    """File-backed session store: one JSONL log per session plus an index.

    Writes take a per-session lock so a session has a single writer at a
    time; reads need no lock (appends are line-atomic for our record sizes).
    """

    def __init__(self, data_dir: str | Path | None = None):
        root = data_dir or os.environ.get(DATA_DIR_ENV) or DEFAULT_DATA_DIR
        self.root = Path(root)
        self.sessions_dir = self.root / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.index_path = self.root / "index.json"
        self._guard = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}
        self._contexts: dict[str, PipelineContext] = {}

    # -- locking and context -------------------------------------------------

    def _lock(self, session_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def attach_context(self, session_id: str, ctx: PipelineContext) -> None:
        """Attach the pipeline inputs for a session loaded in a fresh process.

        The model is verified against the logged hash, so attaching the
        wrong model fails immediately instead of corrupting what-ifs.
        """
        session = self.session(session_id)
        if ctx.model_ref != session.model_ref:
            raise ReplayMismatch(
                "attached model does not match the session's model_ref")
        if tuple(p.pack for p in ctx.packs) != session.packs:
            raise ReplayMismatch(
                "attached packs differ from the ones the session was created with")
        with self._guard:
            self._contexts[session_id] = ctx

    def context(self, session_id: str) -> PipelineContext:
        with self._guard:
            ctx = self._contexts.get(session_id)
        if ctx is None:
            raise ContextUnavailable(
                f"session '{session_id}' has no pipeline context attached; "
                "call attach_context() with the original inputs first")
        return ctx

    # -- raw record I/O -------------------------------------------------------

    def _path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.jsonl"

    def read_records(self, session_id: str) -> list[Record]:
        path = self._path(session_id)
        if not path.exists():
            raise UnknownSession(f"no session '{session_id}'")
        records = []
        for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines()):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorruptLog(f"line {line_no} is not valid JSON: {exc}") from None
            records.append(Record.from_dict(raw))
        return records

    def audit_text(self, session_id: str) -> str:
        path = self._path(session_id)
        if not path.exists():
            raise UnknownSession(f"no session '{session_id}'")
        return path.read_text(encoding="utf-8")

    def _append(self, record: Record) -> None:
        line = json.dumps(record.to_dict(), sort_keys=True)
        with self._path(record.session_id).open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def _write_new(self, records: list[Record]) -> None:
        path = self._path(records[0].session_id)
        with path.open("x", encoding="utf-8") as fh:
            for r in records:
                fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")

    # -- index ----------------------------------------------------------------

    def list_sessions(self) -> dict[str, dict]:
        if not self.index_path.exists():
            return {}
        return json.loads(self.index_path.read_text(encoding="utf-8"))

    def _update_index(self, session_id: str, **entry) -> None:
        with self._guard:
            index = self.list_sessions()
            index.setdefault(session_id, {}).update(entry)
            tmp = self.index_path.with_suffix(".json.tmp")
            tmp.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
            tmp.replace(self.index_path)

    # -- folded view ----------------------------------------------------------

    def session(self, session_id: str) -> DecisionSession:
        return fold_records(self.read_records(session_id))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def create_session(
    store: SessionStore,
    case: CaseInstance,
    model: TabularModel,
    datasheet: Datasheet | None = None,
    model_card: ModelCard | None = None,
    background: list[dict] | None = None,
    cfg: TriggerConfig | None = None,
    policy: SelectionPolicy | None = None,
    packs: list[TemplatePack] | None = None,
    model_name: str | None = None,
    taxonomy: Taxonomy | None = None,
) -> DecisionSession:
    """Run the pipeline for a case and persist a new session.

    Nothing is written unless the whole pipeline succeeds; a new session's
    log always starts with its ``created`` and ``questions_attached`` pair.
    The persisted config carries the *resolved* analysis date, so a later
    replay sees the same calendar the pipeline saw.
    """
    cfg = cfg or TriggerConfig()
    policy = policy or SelectionPolicy()
    packs = list(packs or [])
    if not packs:
        raise SchemaError("a session needs at least one template pack")

    bundle = build_evidence(model, case, datasheet=datasheet,
                            model_card=model_card, background=background, cfg=cfg)
    resolved_cfg = replace(cfg, as_of=bundle.as_of)
    fired = fire_triggers(model, bundle, packs, cfg=resolved_cfg, taxonomy=taxonomy)
    questions = select_questions(fired, policy=policy, taxonomy=taxonomy)

    session_id = secrets.token_hex(16)
    created = Record(
        session_id=session_id, seq=0, kind="created",
        payload={
            "case": case.to_dict(),
            "model_name": model_name,
            "model_ref": model_hash(model),
            "outcome_labels": list(model.outcome_labels),
            "schema": [s.to_dict() for s in model.schema],
            "config": resolved_cfg.to_dict(),
            "policy": policy.to_dict(),
            "packs": [p.pack for p in packs],
            "recommendation": (bundle.recommendation.to_dict()
                               if bundle.recommendation else None),
        },
        timestamp=_now(),
    )
    attached = Record(
        session_id=session_id, seq=1, kind="questions_attached",
        payload={
            "questions": [q.to_dict() for q in questions],
            "evidence": bundle.evidence_json(),
            "skipped": list(bundle.skipped),
        },
        timestamp=_now(),
    )

    with store._lock(session_id):
        store._write_new([created, attached])
    store._update_index(session_id, created_at=created.timestamp, status="open",
                        model_name=model_name)
    ctx = PipelineContext(
        model=model, packs=tuple(packs), cfg=resolved_cfg, policy=policy,
        datasheet=datasheet, model_card=model_card,
        background=tuple(background or ()), model_name=model_name,
    )
    with store._guard:
        store._contexts[session_id] = ctx
    return fold_records([created, attached])


def _require_open(session: DecisionSession) -> None:
    if session.status == "finalized":
        raise SessionFinalized(
            f"session '{session.session_id}' is finalized and read-only")


def record_answer(store: SessionStore, session_id: str, question_index: int,
                  text: str) -> DecisionSession:
    """Log the decision-maker's answer to one attached question."""
    with store._lock(session_id):
        records = store.read_records(session_id)
        session = fold_records(records)
        _require_open(session)
        if not 0 <= question_index < len(session.questions):
            raise SchemaError(
                f"question index {question_index} out of range "
                f"(session has {len(session.questions)} questions)")
        record = Record(session_id=session_id, seq=len(records), kind="answered",
                        payload={"question_index": int(question_index),
                                 "text": str(text)},
                        timestamp=_now())
        store._append(record)
        return fold_records(records + [record])


def _validate_changes(model: TabularModel, case: CaseInstance, changes: dict) -> None:
    if not isinstance(changes, dict):
        raise SchemaError("changes must be a map of feature -> value")
    for name, value in changes.items():
        if value is None:
            raise SchemaError(f"what-if cannot unset feature '{name}'")
    report = validate_case(model, case.with_changes(changes))
    bad = [f for f in report.findings if f.feature in changes]
    if bad:
        raise SchemaError("invalid what-if changes: "
                          + "; ".join(f.detail for f in bad))


def record_whatif(store: SessionStore, session_id: str,
                  changes: dict) -> tuple[DecisionSession, dict]:
    """Score a hypothetical variant of the case and log the outcome.

    The variant is scored fresh (prediction, reachable interventions,
    decision-limit probes) but the session's original questions and evidence
    stay untouched; the extra questions ride along in the ``whatif`` payload.
    Returns the updated session and that payload.
    """
    ctx = store.context(session_id)
    with store._lock(session_id):
        records = store.read_records(session_id)
        session = fold_records(records)
        _require_open(session)
        _validate_changes(ctx.model, parse_case(session.case), changes)

        case = parse_case(session.case).with_changes(changes)
        rec, questions, evidence = whatif_refire(
            ctx.model, case, list(ctx.packs), cfg=ctx.cfg,
            as_of=ctx.cfg.as_of)
        payload = {
            "changes": dict(changes),
            "result": rec.to_dict(),
            "extra_questions": [q.to_dict() for q in questions],
            "evidence": {eid: item.to_dict() for eid, item in evidence.items()},
        }
        record = Record(session_id=session_id, seq=len(records), kind="whatif",
                        payload=payload, timestamp=_now())
        store._append(record)
        return fold_records(records + [record]), payload


def finalize(store: SessionStore, session_id: str, chosen: str,
             rationale: str) -> DecisionSession:
    """Record the human's decision and close the session for good.

    The decision must name one of the model's outcome labels and carry a
    non-empty rationale; how many questions went unanswered is written into
    the record, so the audit trail shows it directly.
    """
    with store._lock(session_id):
        records = store.read_records(session_id)
        session = fold_records(records)
        _require_open(session)
        if chosen not in session.outcome_labels:
            raise SchemaError(
                f"chosen outcome '{chosen}' is not one of the model's labels")
        if not str(rationale).strip():
            raise SchemaError("a decision needs a non-empty rationale")
        record = Record(
            session_id=session_id, seq=len(records), kind="finalized",
            payload={"chosen": chosen, "rationale": str(rationale),
                     "unanswered": session.unanswered},
            timestamp=_now())
        store._append(record)
    store._update_index(session_id, status="finalized")
    return fold_records(records + [record])


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

def _diff(what: str, got, logged) -> None:
    if got != logged:
        raise ReplayMismatch(f"replay diverged at {what}")


def replay(store: SessionStore, session_id: str,
           ctx: PipelineContext | None = None,
           taxonomy: Taxonomy | None = None) -> DecisionSession:
    """Re-derive every derived artifact in the log and verify it matches.

    Human input (answers, the final decision) is taken as logged; everything
    the pipeline computed — recommendation, questions, evidence, what-if
    results — is recomputed from the given context and compared field by
    field, timestamps excluded.  Returns the folded session when the log
    checks out.
    """
    records = store.read_records(session_id)
    session = fold_records(records)
    ctx = ctx or store.context(session_id)

    if ctx.model_ref != session.model_ref:
        raise ReplayMismatch("context model does not match the logged model_ref")
    if tuple(p.pack for p in ctx.packs) != session.packs:
        raise ReplayMismatch("context packs do not match the logged pack list")

    cfg = TriggerConfig.from_dict(session.config)
    policy = SelectionPolicy.from_dict(session.policy)
    case = parse_case(session.case)

    bundle = build_evidence(ctx.model, case, datasheet=ctx.datasheet,
                            model_card=ctx.model_card,
                            background=list(ctx.background), cfg=cfg)
    fired = fire_triggers(ctx.model, bundle, list(ctx.packs), cfg=cfg,
                          taxonomy=taxonomy)
    questions = select_questions(fired, policy=policy, taxonomy=taxonomy)

    _diff("outcome_labels", list(ctx.model.outcome_labels),
          list(session.outcome_labels))
    _diff("recommendation",
          bundle.recommendation.to_dict() if bundle.recommendation else None,
          session.recommendation)
    _diff("questions", [q.to_dict() for q in questions],
          [dict(q) for q in session.questions])
    _diff("evidence", bundle.evidence_json(), session.evidence)
    _diff("skipped", list(bundle.skipped), list(session.skipped))

    for i, w in enumerate(session.whatifs):
        variant = case.with_changes(w["changes"])
        rec, extra, evidence = whatif_refire(
            ctx.model, variant, list(ctx.packs), cfg=cfg, as_of=cfg.as_of)
        _diff(f"whatif {i} result", rec.to_dict(), w["result"])
        _diff(f"whatif {i} questions", [q.to_dict() for q in extra],
              w["extra_questions"])
        _diff(f"whatif {i} evidence",
              {eid: item.to_dict() for eid, item in evidence.items()},
              w["evidence"])
    return session
