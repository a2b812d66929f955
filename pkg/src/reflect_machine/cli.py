"""``reflect`` command-line interface.

Exit codes follow one convention everywhere: 0 for clean success, 1 for hard
failures (unreadable or malformed inputs, unknown ids), 2 for runs that
completed but surfaced findings — ``ask`` on a case with validation
problems still prints its report and exits 2, and session operations that
the store refused (finalized session, bad index, replay mismatch) exit 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ParseError, ReflectError, UnknownSession
from .evidence import TriggerConfig, build_evidence
from .model import (
    parse_background,
    parse_case,
    parse_datasheet,
    parse_model_card,
    parse_model_spec,
)
from .report import build_report, report_to_json, report_to_markdown
from .session import (
    PipelineContext,
    SessionStore,
    create_session,
    finalize,
    record_answer,
    record_whatif,
    replay,
)
from .templates import load_packs
from .triggers import SelectionPolicy, fire_triggers, select_questions


class _Parser(argparse.ArgumentParser):
    """argparse, but usage errors are hard failures (exit 1, not 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_input_flags(p: argparse.ArgumentParser, case_required: bool = True) -> None:
    p.add_argument("--model", required=True, help="model spec JSON file")
    p.add_argument("--case", required=case_required, help="case JSON file")
    p.add_argument("--datasheet", help="datasheet JSON file")
    p.add_argument("--model-card", help="model card JSON file")
    p.add_argument("--background", help="background sample JSON file")
    p.add_argument("--packs", action="append", metavar="NAME_OR_PATH",
                   help="template pack, shipped name or file path; "
                        "repeatable, scanned in order (default: generic)")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("trigger configuration")
    g.add_argument("--config", help="JSON file with configuration values")
    g.add_argument("--top-k", type=int)
    g.add_argument("--alt-margin", type=float)
    g.add_argument("--prox-frac", type=float)
    g.add_argument("--err-threshold", type=float)
    g.add_argument("--cf-grid-steps", type=int)
    g.add_argument("--cf-max-changed", type=int)
    g.add_argument("--prox-search-frac", type=float)
    g.add_argument("--shapley-cap", type=int)
    g.add_argument("--as-of", metavar="YYYY-MM-DD")
    g.add_argument("--z-out", type=float)
    g.add_argument("--rare-frac", type=float)
    g.add_argument("--stale-years", type=float)
    g.add_argument("--min-sample", type=int)
    g.add_argument("--imbalance-frac", type=float)
    s = p.add_argument_group("selection policy")
    s.add_argument("--budget", type=int)
    s.add_argument("--max-per-type", type=int)
    s.add_argument("--no-require-creating", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="reflect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    ask = sub.add_parser("ask",
                         help="run the pipeline for one case and print the report")
    _add_input_flags(ask)
    _add_config_flags(ask)
    ask.add_argument("--format", choices=("json", "markdown"), default="json")

    explain = sub.add_parser("explain",
                             help="print the labeled evidence for one case")
    _add_input_flags(explain)
    _add_config_flags(explain)

    session = sub.add_parser("session",
                             help="create, update, inspect, and replay sessions")
    ssub = session.add_subparsers(dest="session_command", required=True)

    new = ssub.add_parser("new", help="create a session")
    _add_input_flags(new)
    _add_config_flags(new)
    new.add_argument("--data-dir")

    answer = ssub.add_parser("answer",
                             help="record an answer to one question")
    answer.add_argument("session_id")
    answer.add_argument("--index", type=int, required=True)
    answer.add_argument("--text", required=True)
    answer.add_argument("--data-dir")

    whatif = ssub.add_parser("whatif",
                             help="score a hypothetical variant of the case")
    whatif.add_argument("session_id")
    whatif.add_argument("--set", action="append", required=True, dest="changes",
                        metavar="FEATURE=VALUE")
    _add_input_flags(whatif, case_required=False)
    whatif.add_argument("--data-dir")

    fin = ssub.add_parser("finalize",
                          help="record the decision and close the session")
    fin.add_argument("session_id")
    fin.add_argument("--chosen", required=True)
    fin.add_argument("--rationale", required=True)
    fin.add_argument("--data-dir")

    show = ssub.add_parser("show", help="print a session")
    show.add_argument("session_id")
    show.add_argument("--data-dir")

    rep = ssub.add_parser("replay",
                          help="re-derive a session from its inputs and verify the log")
    rep.add_argument("session_id")
    _add_input_flags(rep, case_required=False)
    rep.add_argument("--data-dir")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--data-dir")
    serve.add_argument("--registry", help="JSON registry file of extra models")
    serve.add_argument("--no-fixtures", action="store_true",
                       help="serve only the registry file's models")
    serve.add_argument("--cors-origin", action="append", default=[],
                       metavar="ORIGIN")

    return parser


# ---------------------------------------------------------------------------
# assembling inputs from flags
# ---------------------------------------------------------------------------

def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read '{path}': {exc}") from None


def _config_from(args) -> TriggerConfig:
    base = json.loads(_read(args.config)) if args.config else {}
    if not isinstance(base, dict):
        raise ParseError("config file must hold a JSON object")
    flags = {
        "top_k": args.top_k, "alt_margin": args.alt_margin,
        "prox_frac": args.prox_frac, "err_threshold": args.err_threshold,
        "cf_grid_steps": args.cf_grid_steps, "cf_max_changed": args.cf_max_changed,
        "prox_search_frac": args.prox_search_frac, "shapley_cap": args.shapley_cap,
        "as_of": args.as_of,
    }
    base.update({k: v for k, v in flags.items() if v is not None})
    metadata = dict(base.get("metadata", {}))
    md_flags = {
        "z_out": args.z_out, "rare_frac": args.rare_frac,
        "stale_years": args.stale_years, "min_sample": args.min_sample,
        "imbalance_frac": args.imbalance_frac,
    }
    metadata.update({k: v for k, v in md_flags.items() if v is not None})
    if metadata:
        base["metadata"] = metadata
    return TriggerConfig.from_dict(base)


def _policy_from(args) -> SelectionPolicy:
    raw = {}
    if args.budget is not None:
        raw["budget"] = args.budget
    if args.max_per_type is not None:
        raw["max_per_type"] = args.max_per_type
    if args.no_require_creating:
        raw["require_creating"] = False
    return SelectionPolicy.from_dict(raw)


def _load_inputs(args, need_case: bool = True):
    model = parse_model_spec(_read(args.model))
    case = parse_case(_read(args.case), model) if need_case and args.case else None
    datasheet = parse_datasheet(_read(args.datasheet)) if args.datasheet else None
    model_card = parse_model_card(_read(args.model_card)) if args.model_card else None
    background = (parse_background(_read(args.background), model)
                  if args.background else None)
    packs = load_packs(list(args.packs or ["generic"]))
    return model, case, datasheet, model_card, background, packs


def _parse_changes(pairs: list[str]) -> dict:
    changes = {}
    for pair in pairs:
        if "=" not in pair:
            raise ParseError(f"--set needs FEATURE=VALUE, got '{pair}'")
        name, _, raw = pair.partition("=")
        try:
            changes[name] = json.loads(raw)
        except json.JSONDecodeError:
            changes[name] = raw
    return changes


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _fail(exc: ReflectError, code: int) -> int:
    sys.stderr.write(f"reflect: {exc.code}: {exc}\n")
    return code


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _cmd_ask(args) -> int:
    model, case, datasheet, model_card, background, packs = _load_inputs(args)
    cfg = _config_from(args)
    policy = _policy_from(args)
    bundle = build_evidence(model, case, datasheet=datasheet,
                            model_card=model_card, background=background, cfg=cfg)
    questions = select_questions(
        fire_triggers(model, bundle, packs, cfg=cfg), policy=policy)
    report = build_report(Path(args.case).stem, bundle, questions)
    if args.format == "markdown":
        print(report_to_markdown(report), end="")
    else:
        print(report_to_json(report), end="")
    return 2 if bundle.case_report.findings else 0


def _cmd_explain(args) -> int:
    model, case, datasheet, model_card, background, packs = _load_inputs(args)
    cfg = _config_from(args)
    bundle = build_evidence(model, case, datasheet=datasheet,
                            model_card=model_card, background=background, cfg=cfg)
    _emit({"case_id": Path(args.case).stem,
           "evidence": bundle.evidence_json(),
           "skipped": list(bundle.skipped)})
    return 0


def _cmd_session_new(args) -> int:
    model, case, datasheet, model_card, background, packs = _load_inputs(args)
    cfg = _config_from(args)
    policy = _policy_from(args)
    store = SessionStore(args.data_dir)
    session = create_session(store, case, model, datasheet=datasheet,
                             model_card=model_card, background=background,
                             cfg=cfg, policy=policy, packs=packs)
    _emit(session.to_dict())
    return 0


def _attach_from_flags(store: SessionStore, args) -> None:
    model, _case, datasheet, model_card, background, packs = _load_inputs(
        args, need_case=False)
    session = store.session(args.session_id)
    store.attach_context(args.session_id, PipelineContext(
        model=model, packs=tuple(packs),
        cfg=TriggerConfig.from_dict(session.config),
        policy=SelectionPolicy.from_dict(session.policy),
        datasheet=datasheet, model_card=model_card,
        background=tuple(background or ()),
    ))


def _cmd_session(args) -> int:
    store = SessionStore(args.data_dir)
    cmd = args.session_command
    try:
        if cmd == "answer":
            session = record_answer(store, args.session_id, args.index, args.text)
            _emit(session.to_dict())
        elif cmd == "whatif":
            _attach_from_flags(store, args)
            _session, payload = record_whatif(store, args.session_id,
                                              _parse_changes(args.changes))
            _emit(payload)
        elif cmd == "finalize":
            session = finalize(store, args.session_id, args.chosen, args.rationale)
            _emit(session.to_dict())
        elif cmd == "show":
            _emit(store.session(args.session_id).to_dict())
        elif cmd == "replay":
            _attach_from_flags(store, args)
            replay(store, args.session_id)
            print("replay OK")
        return 0
    except UnknownSession as exc:
        return _fail(exc, 1)
    except ParseError as exc:
        return _fail(exc, 1)
    except ReflectError as exc:
        return _fail(exc, 2)


def _cmd_serve(args) -> int:
    from .service import create_app, fixture_registry, load_registry_file, serve

    registry = {} if args.no_fixtures else fixture_registry()
    if args.registry:
        registry.update(load_registry_file(args.registry))
    if not registry:
        raise ParseError("nothing to serve: --no-fixtures without --registry")
    app = create_app(registry, data_dir=args.data_dir,
                     cors_origins=tuple(args.cors_origin))
    serve(app, host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "ask":
            return _cmd_ask(args)
        if args.command == "explain":
            return _cmd_explain(args)
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "session":
            if args.session_command == "new":
                return _cmd_session_new(args)
            return _cmd_session(args)
    except ReflectError as exc:
        return _fail(exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
