"""HTTP facade over sessions: create, answer, what-if, finalize, audit.

The service owns a model registry (fixtures by default, more via a registry
file) and a :class:`~reflect_machine.session.SessionStore`.  Every mutating
endpoint appends exactly one audit record when it succeeds and none when it
fails; errors map to ``{error, message, stage}`` bodies with 400 for bad
input, 404 for unknown resources, and 409 for mutations after finalize.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse

from .errors import ParseError, ReflectError, SchemaError, SessionFinalized, UnknownSession
from .evidence import TriggerConfig
from .fixtures import fixture_names, load_fixture
from .model import (
    CaseInstance,
    Datasheet,
    ModelCard,
    TabularModel,
    parse_background,
    parse_case,
    parse_datasheet,
    parse_model_card,
    parse_model_spec,
)
from .session import (
    PipelineContext,
    SessionStore,
    create_session,
    finalize,
    record_answer,
    record_whatif,
)
from .templates import TemplatePack, load_packs
from .triggers import SelectionPolicy


@dataclass(frozen=True)
class ModelEntry:
    """One servable model with everything its sessions need."""

    name: str
    description: str
    model: TabularModel
    packs: tuple[TemplatePack, ...]
    cfg: TriggerConfig = field(default_factory=TriggerConfig)
    policy: SelectionPolicy = field(default_factory=SelectionPolicy)
    datasheet: Datasheet | None = None
    model_card: ModelCard | None = None
    background: tuple[dict, ...] = ()
    sample_cases: dict[str, CaseInstance] = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "outcome_labels": list(self.model.outcome_labels),
            "schema": [s.to_dict() for s in self.model.schema],
            "packs": [p.pack for p in self.packs],
            "config": self.cfg.to_dict(),
            "policy": self.policy.to_dict(),
            "sample_cases": {n: c.to_dict() for n, c in self.sample_cases.items()},
        }


def fixture_registry() -> dict[str, ModelEntry]:
    """Registry entries for the shipped demo domains."""
    registry = {}
    for name in fixture_names():
        fx = load_fixture(name)
        registry[name] = ModelEntry(
            name=fx.name, description=fx.description, model=fx.model,
            packs=fx.packs, cfg=fx.cfg, policy=fx.policy,
            datasheet=fx.datasheet, model_card=fx.model_card,
            background=tuple(fx.background), sample_cases=dict(fx.cases),
        )
    return registry


def load_registry_file(path: str | Path) -> dict[str, ModelEntry]:
    """Build registry entries from a JSON file mapping names to file paths.

    Each entry needs ``model`` and ``packs``; ``datasheet``, ``model_card``,
    ``background``, ``config``, ``policy``, ``description``, and
    ``sample_cases`` (name -> case file) are optional.  Relative paths are
    resolved against the registry file's directory.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read registry '{path}': {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"registry is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ParseError("registry must map model names to entries")

    base = path.parent

    def read(rel: str) -> str:
        target = base / rel
        try:
            return target.read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"cannot read '{target}': {exc}") from None

    registry = {}
    for name, entry in raw.items():
        if not isinstance(entry, dict) or "model" not in entry or "packs" not in entry:
            raise ParseError(f"registry entry '{name}' needs model and packs")
        model = parse_model_spec(read(entry["model"]))
        packs = tuple(load_packs([
            p if not (base / p).exists() else str(base / p)
            for p in entry["packs"]
        ]))
        registry[name] = ModelEntry(
            name=name,
            description=str(entry.get("description", "")),
            model=model,
            packs=packs,
            cfg=TriggerConfig.from_dict(entry.get("config", {})),
            policy=SelectionPolicy.from_dict(entry.get("policy", {})),
            datasheet=(parse_datasheet(read(entry["datasheet"]))
                       if entry.get("datasheet") else None),
            model_card=(parse_model_card(read(entry["model_card"]))
                        if entry.get("model_card") else None),
            background=(tuple(parse_background(read(entry["background"]), model))
                        if entry.get("background") else ()),
            sample_cases={n: parse_case(read(f), model)
                          for n, f in entry.get("sample_cases", {}).items()},
        )
    return registry


def _error_body(exc: ReflectError) -> dict:
    return {"error": exc.code, "message": str(exc),
            "stage": getattr(exc, "stage", None)}


class UnknownModel(UnknownSession):
    code = "unknown_model"


def _status_for(exc: ReflectError) -> int:
    if isinstance(exc, UnknownSession):
        return 404
    if isinstance(exc, SessionFinalized):
        return 409
    return 400


def create_app(
    registry: dict[str, ModelEntry] | None = None,
    data_dir: str | Path | None = None,
    cors_origins: tuple[str, ...] = (),
) -> FastAPI:
    registry = fixture_registry() if registry is None else registry
    store = SessionStore(data_dir)
    app = FastAPI(title="reflect-machine", docs_url=None, redoc_url=None)

    if cors_origins:
        from fastapi.middleware.cors import CORSMiddleware
        app.add_middleware(
            CORSMiddleware, allow_origins=list(cors_origins),
            allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(ReflectError)
    async def _reflect_error(request: Request, exc: ReflectError):
        return JSONResponse(status_code=_status_for(exc), content=_error_body(exc))

    @app.exception_handler(RequestValidationError)
    async def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={
            "error": "bad_request", "message": str(exc), "stage": None})

    def _entry(name) -> ModelEntry:
        if not isinstance(name, str) or name not in registry:
            raise UnknownModel(f"no model named '{name}' in the registry")
        return registry[name]

    def _ensure_context(session_id: str) -> None:
        """Rebuild the pipeline context from the registry after a restart."""
        try:
            store.context(session_id)
            return
        except ReflectError:
            pass
        session = store.session(session_id)
        if session.model_name not in registry:
            raise SchemaError(
                f"session '{session_id}' was created for model "
                f"'{session.model_name}', which this service does not serve")
        entry = registry[session.model_name]
        store.attach_context(session_id, PipelineContext(
            model=entry.model, packs=entry.packs,
            cfg=TriggerConfig.from_dict(session.config),
            policy=SelectionPolicy.from_dict(session.policy),
            datasheet=entry.datasheet, model_card=entry.model_card,
            background=entry.background, model_name=entry.name,
        ))

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/models")
    def models():
        return {"models": [registry[name].summary() for name in sorted(registry)]}

    @app.post("/sessions", status_code=201)
    def create(payload: dict = Body(...)):
        entry = _entry(payload.get("model"))
        if "case_name" in payload:
            case = entry.sample_cases.get(payload["case_name"])
            if case is None:
                raise SchemaError(f"model '{entry.name}' has no sample case "
                                  f"named '{payload['case_name']}'")
        elif "case" in payload:
            case = parse_case(payload["case"], entry.model)
        else:
            raise SchemaError("session creation needs a case or a case_name")

        cfg, policy = entry.cfg, entry.policy
        overrides = payload.get("overrides") or {}
        if not isinstance(overrides, dict):
            raise SchemaError("overrides must be an object")
        if overrides.get("config"):
            cfg = TriggerConfig.from_dict({**cfg.to_dict(), **overrides["config"]})
        if overrides.get("policy"):
            policy = SelectionPolicy.from_dict({**policy.to_dict(),
                                                **overrides["policy"]})

        session = create_session(
            store, case, entry.model, datasheet=entry.datasheet,
            model_card=entry.model_card, background=list(entry.background),
            cfg=cfg, policy=policy, packs=list(entry.packs),
            model_name=entry.name)
        return session.to_dict()

    @app.get("/sessions/{session_id}")
    def show(session_id: str):
        return store.session(session_id).to_dict()

    @app.post("/sessions/{session_id}/answers")
    def answer(session_id: str, payload: dict = Body(...)):
        if "question_index" not in payload or "text" not in payload:
            raise SchemaError("an answer needs question_index and text")
        try:
            index = int(payload["question_index"])
        except (TypeError, ValueError):
            raise SchemaError("question_index must be an integer") from None
        session = record_answer(store, session_id, index, str(payload["text"]))
        return session.to_dict()

    @app.post("/sessions/{session_id}/whatif")
    def whatif(session_id: str, payload: dict = Body(...)):
        changes = payload.get("changes")
        if not isinstance(changes, dict) or not changes:
            raise SchemaError("a what-if needs a non-empty changes map")
        _ensure_context(session_id)
        _session, result = record_whatif(store, session_id, changes)
        return {"result": result["result"],
                "extra_questions": result["extra_questions"],
                "evidence": result["evidence"]}

    @app.post("/sessions/{session_id}/decision")
    def decide(session_id: str, payload: dict = Body(...)):
        if "chosen" not in payload or "rationale" not in payload:
            raise SchemaError("a decision needs chosen and rationale")
        session = finalize(store, session_id, str(payload["chosen"]),
                           str(payload["rationale"]))
        return session.to_dict()

    @app.get("/sessions/{session_id}/audit")
    def audit(session_id: str):
        return PlainTextResponse(store.audit_text(session_id),
                                 media_type="application/x-ndjson")

    return app


def serve(app: FastAPI, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn
    uvicorn.run(app, host=host, port=port, log_level="warning")
