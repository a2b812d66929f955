"""
Sessions: an append-only account of the whole decision
======================================================

For accountability the point is not just asking questions but keeping the
record: what the system recommended, what it asked, what the human answered,
which hypotheticals they probed, and what they finally decided.  Sessions
are JSONL logs — every mutation is one appended record — and ``replay``
re-derives the whole pipeline from the logged inputs to prove the file has
not been edited.
"""

import tempfile

from reflect_machine.fixtures import load_fixture
from reflect_machine.session import (
    SessionStore,
    create_session,
    finalize,
    record_answer,
    record_whatif,
    replay,
)

fx = load_fixture("health")

with tempfile.TemporaryDirectory() as tmp:
    store = SessionStore(tmp)
    session = create_session(
        store, fx.cases["base"], fx.model, datasheet=fx.datasheet,
        model_card=fx.model_card, background=fx.background,
        cfg=fx.cfg, policy=fx.policy, packs=list(fx.packs),
        model_name="health")
    sid = session.session_id
    print(f"session {sid[:12]}…  recommendation: "
          f"{session.recommendation['predicted']}")
    for i, q in enumerate(session.questions):
        print(f"  [{i}] ({q['qtype']}) {q['text']}")
    print()

    # The decision-maker answers one question, probes one hypothetical, and
    # decides.  Each call appends exactly one record.
    record_answer(store, sid, 0, "Heart rate came from a calibrated monitor.")
    _, probe = record_whatif(store, sid, {"age": 53})
    print(f"what-if age=53 -> {probe['result']['predicted']}, "
          f"{len(probe['extra_questions'])} extra question(s)")
    session = finalize(store, sid, "no-treatment",
                       "Margin is wide and the vitals are unremarkable.")
    print(f"status: {session.status}, unanswered: "
          f"{session.decision['unanswered']}")
    print()

    print("audit log (kind per line):")
    for record in store.read_records(sid):
        print(f"  seq {record.seq}: {record.kind}")
    print()

    # Replay recomputes evidence, questions, and every what-if from the
    # logged inputs and compares; an intact log passes silently.
    replay(store, sid)
    print("replay: OK — the log matches a fresh derivation")
