"""
Driving the HTTP service
========================

The same session loop, but over HTTP — the surface a front-end would use.
This script starts the bundled service on a local port (equivalent to
``reflect serve``), walks one session through answer → what-if → decision,
and fetches the audit log.  Only the standard library is used on the client
side, to keep the wire format in plain sight.
"""

import json
import threading
import time
import urllib.request

import uvicorn

from reflect_machine.service import create_app

PORT = 8765
BASE = f"http://127.0.0.1:{PORT}"


def call(method, path, payload=None):
    data = json.dumps(payload).encode() if payload is not None else None
    req = urllib.request.Request(f"{BASE}{path}", data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        body = resp.read().decode()
        return resp.status, body


server = uvicorn.Server(uvicorn.Config(create_app(), host="127.0.0.1",
                                       port=PORT, log_level="error"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
for _ in range(100):
    try:
        call("GET", "/healthz")
        break
    except OSError:
        time.sleep(0.05)

status, body = call("GET", "/models")
names = [m["name"] for m in json.loads(body)["models"]]
print(f"GET /models -> {status}, serving: {', '.join(names)}")

status, body = call("POST", "/sessions",
                    {"model": "health", "case_name": "base"})
session = json.loads(body)
sid = session["session_id"]
print(f"POST /sessions -> {status}, recommendation "
      f"{session['recommendation']['predicted']!r}, "
      f"{len(session['questions'])} questions")

status, _ = call("POST", f"/sessions/{sid}/answers",
                 {"question_index": 0, "text": "Reviewed the intake notes."})
print(f"POST /sessions/{{id}}/answers -> {status}")

status, body = call("POST", f"/sessions/{sid}/whatif",
                    {"changes": {"age": 53}})
print(f"POST /sessions/{{id}}/whatif -> {status}, "
      f"now {json.loads(body)['result']['predicted']!r}")

status, _ = call("POST", f"/sessions/{sid}/decision",
                 {"chosen": "no-treatment", "rationale": "Margin is wide."})
print(f"POST /sessions/{{id}}/decision -> {status}")

status, body = call("GET", f"/sessions/{sid}/audit")
kinds = [json.loads(line)["kind"] for line in body.splitlines()]
print(f"GET /sessions/{{id}}/audit -> {status}, records: {', '.join(kinds)}")

server.should_exit = True
thread.join(timeout=5)
