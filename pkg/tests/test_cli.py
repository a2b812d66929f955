"""End-to-end checks of the ``reflect`` command line.

Everything goes through :func:`reflect_machine.cli.main` in-process; stdout
is parsed back out of capsys.  The exit-code convention under test:

* 0 — clean run
* 1 — hard failure (usage, unreadable input, unknown session)
* 2 — completed with findings (``ask`` on a problematic case) or a session
  operation the store refused (bad index, finalized session, replay mismatch)
"""

import json
from pathlib import Path

import pytest

import reflect_machine.fixtures
from reflect_machine.cli import build_parser, main

FIXTURES = Path(reflect_machine.fixtures.__file__).parent
HEALTH = FIXTURES / "health"


def health_flags(case_file="case.json", with_case=True, with_config=True):
    flags = ["--model", str(HEALTH / "model.json")]
    if with_case:
        flags += ["--case", str(HEALTH / case_file)]
    flags += [
        "--datasheet", str(HEALTH / "datasheet.json"),
        "--model-card", str(HEALTH / "model_card.json"),
        "--background", str(HEALTH / "background.json"),
        "--packs", "health", "--packs", "generic",
    ]
    if with_config:  # whatif/replay reuse the session's stored config instead
        flags += ["--cf-grid-steps", "121", "--as-of", "2026-01-15"]
    return flags


def run_cli(argv):
    try:
        return main(argv)
    except SystemExit as exc:  # argparse usage errors raise instead of return
        return exc.code


# ---------------------------------------------------------------------------
# ask / explain
# ---------------------------------------------------------------------------

def test_ask_json_exits_zero_on_clean_case(capsys):
    rc = run_cli(["ask", *health_flags()])
    out = capsys.readouterr().out
    assert rc == 0
    report = json.loads(out)
    assert report["case_id"] == "case"
    assert report["recommendation"]["predicted"] == "no-treatment"
    assert [q["template_id"] for q in report["questions"]] == [
        "h-q2-feature-effect",
        "h-q5-similar-profiles",
        "h-q10-older",
        "h-q3-missing-factor",
        "h-q4-follows",
    ]
    assert out.endswith("\n")


def test_ask_markdown_format(capsys):
    rc = run_cli(["ask", *health_flags(), "--format", "markdown"])
    out = capsys.readouterr().out
    assert rc == 0
    assert out.startswith("# Reflection report — case\n")
    assert "Recommendation: **no-treatment**" in out
    assert "## Q2 · Relevance of Data" in out


def test_ask_exits_two_on_validation_findings(capsys):
    rc = run_cli(["ask", *health_flags("case-incomplete.json")])
    out = capsys.readouterr().out
    assert rc == 2
    # the report is still printed in full
    report = json.loads(out)
    assert report["recommendation"] is None
    assert "predict" in report["skipped"]


def test_ask_distribution_outlier_is_not_a_validation_finding(capsys):
    # 190 bpm is striking but in range: the run itself is clean, so exit 0.
    rc = run_cli(["ask", *health_flags("case-outlier.json")])
    report = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert report["questions"][0]["template_id"] == "h-q1-outlier"


def test_ask_unreadable_model_exits_one(tmp_path, capsys):
    flags = health_flags()
    flags[1] = str(tmp_path / "nope.json")
    rc = run_cli(["ask", *flags])
    err = capsys.readouterr().err
    assert rc == 1
    assert err.startswith("reflect: parse_error:")
    assert "cannot read" in err


def test_missing_required_flag_is_a_usage_error(capsys):
    rc = run_cli(["ask", "--model", str(HEALTH / "model.json")])
    assert rc == 1
    assert "--case" in capsys.readouterr().err


def test_bad_policy_flag_exits_one(capsys):
    rc = run_cli(["ask", *health_flags(), "--budget", "0"])
    assert rc == 1
    assert "budget" in capsys.readouterr().err


def test_config_file_matches_equivalent_flags(tmp_path, capsys):
    rc1 = run_cli(["ask", *health_flags()])
    out1 = capsys.readouterr().out
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"cf_grid_steps": 121, "as_of": "2026-01-15"}))
    base = health_flags()[:-4]  # same inputs, minus the two config flags
    rc2 = run_cli(["ask", *base, "--config", str(cfg)])
    out2 = capsys.readouterr().out
    assert (rc1, out1) == (rc2, out2)


def test_explain_prints_labeled_evidence(capsys):
    rc = run_cli(["explain", *health_flags()])
    out = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert out["case_id"] == "case"
    assert out["skipped"] == []
    ids = set(out["evidence"])
    assert {"input-data", "recommendation", "attr:shapley"} <= ids


# ---------------------------------------------------------------------------
# session lifecycle
# ---------------------------------------------------------------------------

def new_session(tmp_path, capsys):
    rc = run_cli(["session", "new", *health_flags(), "--data-dir", str(tmp_path)])
    out = json.loads(capsys.readouterr().out)
    assert rc == 0
    return out


def test_session_round_trip(tmp_path, capsys):
    created = new_session(tmp_path, capsys)
    sid = created["session_id"]
    assert created["status"] == "open"
    assert len(created["questions"]) == 5
    data = ["--data-dir", str(tmp_path)]

    rc = run_cli(["session", "answer", sid, "--index", "0",
                  "--text", "checked the chart", *data])
    answered = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert answered["responses"]["0"] == "checked the chart"

    rc = run_cli(["session", "whatif", sid, "--set", "age=53",
                  *health_flags(with_case=False, with_config=False), *data])
    payload = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert payload["changes"] == {"age": 53}
    assert payload["result"]["predicted"] == "treatment-indicated"
    assert [q["template_id"] for q in payload["extra_questions"]] == ["g-q10-boundary"]

    rc = run_cli(["session", "replay", sid,
                  *health_flags(with_case=False, with_config=False), *data])
    assert rc == 0
    assert capsys.readouterr().out == "replay OK\n"

    rc = run_cli(["session", "finalize", sid, "--chosen", "no-treatment",
                  "--rationale", "follow-up in six months", *data])
    final = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert final["status"] == "finalized"
    assert final["decision"]["unanswered"] == 4

    rc = run_cli(["session", "show", sid, *data])
    shown = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert shown["status"] == "finalized"
    assert len(shown["whatifs"]) == 1


def test_session_op_on_finalized_exits_two(tmp_path, capsys):
    sid = new_session(tmp_path, capsys)["session_id"]
    data = ["--data-dir", str(tmp_path)]
    run_cli(["session", "finalize", sid, "--chosen", "no-treatment",
             "--rationale", "done", *data])
    capsys.readouterr()
    rc = run_cli(["session", "answer", sid, "--index", "0",
                  "--text", "late", *data])
    err = capsys.readouterr().err
    assert rc == 2
    assert err.startswith("reflect: session_finalized:")


def test_unknown_session_exits_one(tmp_path, capsys):
    rc = run_cli(["session", "show", "deadbeef", "--data-dir", str(tmp_path)])
    err = capsys.readouterr().err
    assert rc == 1
    assert err.startswith("reflect: unknown_session:")


def test_answer_index_out_of_range_exits_two(tmp_path, capsys):
    sid = new_session(tmp_path, capsys)["session_id"]
    rc = run_cli(["session", "answer", sid, "--index", "99", "--text", "x",
                  "--data-dir", str(tmp_path)])
    err = capsys.readouterr().err
    assert rc == 2
    assert err.startswith("reflect: schema_error:")


def test_whatif_set_values_parse_as_json_with_string_fallback(tmp_path, capsys):
    sid = new_session(tmp_path, capsys)["session_id"]
    data = ["--data-dir", str(tmp_path)]
    # "age=53" was exercised above; a bare word should survive as a string
    rc = run_cli(["session", "whatif", sid, "--set", "age=fifty",
                  *health_flags(with_case=False, with_config=False), *data])
    err = capsys.readouterr().err
    assert rc == 2  # store rejects the value, but it parsed as the string
    assert "invalid what-if changes" in err


def test_whatif_set_without_equals_exits_one(tmp_path, capsys):
    sid = new_session(tmp_path, capsys)["session_id"]
    rc = run_cli(["session", "whatif", sid, "--set", "age",
                  *health_flags(with_case=False, with_config=False),
                  "--data-dir", str(tmp_path)])
    err = capsys.readouterr().err
    assert rc == 1
    assert "FEATURE=VALUE" in err


def test_replay_detects_a_tampered_log(tmp_path, capsys):
    sid = new_session(tmp_path, capsys)["session_id"]
    log = tmp_path / "sessions" / f"{sid}.jsonl"
    text = log.read_text()
    assert '"predicted": "no-treatment"' in text
    log.write_text(text.replace('"predicted": "no-treatment"',
                                '"predicted": "treatment-indicated"'))
    rc = run_cli(["session", "replay", sid,
                  *health_flags(with_case=False, with_config=False),
                  "--data-dir", str(tmp_path)])
    err = capsys.readouterr().err
    assert rc == 2
    assert err.startswith("reflect: replay_mismatch:")
    assert "diverged" in err


def test_data_dir_env_var_is_honored(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("REFLECT_DATA_DIR", str(tmp_path / "var"))
    rc = run_cli(["session", "new", *health_flags()])
    out = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert (tmp_path / "var" / "sessions" / f"{out['session_id']}.jsonl").exists()


# ---------------------------------------------------------------------------
# serve (flag wiring only; the HTTP behaviour is covered in test_service)
# ---------------------------------------------------------------------------

def test_serve_flags_parse():
    args = build_parser().parse_args(
        ["serve", "--port", "9001", "--no-fixtures", "--registry", "r.json",
         "--cors-origin", "http://localhost:5173"])
    assert (args.port, args.no_fixtures) == (9001, True)
    assert args.cors_origin == ["http://localhost:5173"]


def test_serve_with_nothing_to_serve_exits_one(capsys):
    rc = run_cli(["serve", "--no-fixtures"])
    err = capsys.readouterr().err
    assert rc == 1
    assert "nothing to serve" in err
