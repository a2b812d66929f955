// Browser wiring: one screen, three panes (recommendation / questions /
// evidence), a what-if explorer, and the decision bar.  All markup comes
// from the pure renderers; this file only routes events to the API client
// and re-renders.

import { ApiError, ConsoleApi } from "./api.js";
import {
  renderDecisionBar,
  renderEvidence,
  renderQuestions,
  renderRecommendation,
  renderWhatifResult,
} from "./render.js";
import type { SessionBody, WhatifEntry } from "./types.js";
import { coerceValue, isReadOnly, specFor, validateChanges } from "./viewmodel.js";

const api = new ConsoleApi(
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8000",
);

const app = document.getElementById("app")!;
let session: SessionBody | null = null;
let lastProbe: WhatifEntry | null = null;

function flash(message: string, isError = true): void {
  const bar = document.getElementById("flash")!;
  bar.textContent = message;
  bar.className = isError ? "error" : "info";
  bar.hidden = message === "";
}

function whatifForm(s: SessionBody): string {
  const fields = s.schema
    .map((spec) => {
      const current = s.case.values[spec.name];
      const hint =
        spec.kind === "numeric"
          ? `${spec.range?.[0]}–${spec.range?.[1]}${spec.unit ? " " + spec.unit : ""}`
          : spec.categories?.join(" | ") ?? "";
      const missing = current === null ? " (missing)" : "";
      return (
        `<label>${spec.name}${missing} <input name="${spec.name}" ` +
        `placeholder="${current ?? ""}" title="${hint}">` +
        `<small>${hint}${spec.mutable ? "" : " · fixed in practice"}</small></label>`
      );
    })
    .join("\n");
  return (
    '<section class="pane" id="whatif-pane"><h2>What if…</h2>' +
    `<form id="whatif-form">\n${fields}\n<button>probe</button></form>` +
    '<div id="whatif-result"></div></section>'
  );
}

function redraw(): void {
  if (!session) return;
  const readOnly = isReadOnly(session);
  app.innerHTML = [
    renderRecommendation(session),
    renderQuestions(session, readOnly),
    readOnly ? "" : whatifForm(session),
    renderEvidence(session.evidence),
    renderDecisionBar(session, api.auditUrl(session.session_id)),
  ].join("\n");
  const result = document.getElementById("whatif-result");
  if (result) {
    result.innerHTML = renderWhatifResult(lastProbe, session.outcome_labels);
  }
}

async function boot(): Promise<void> {
  const models = await api.models();
  const picker = document.getElementById("model-picker")!;
  picker.innerHTML = models
    .map((m) =>
      Object.keys(m.sample_cases)
        .map(
          (c) =>
            `<button class="pick" data-model="${m.name}" data-case="${c}">` +
            `${m.name} / ${c}</button>`,
        )
        .join(" "),
    )
    .join(" ");
  picker.addEventListener("click", (ev) => {
    const btn = ev.target as HTMLElement;
    if (btn.dataset.model && btn.dataset.case) {
      void openSession(btn.dataset.model, btn.dataset.case);
    }
  });
}

async function openSession(model: string, caseName: string): Promise<void> {
  try {
    session = await api.createSession(model, { case_name: caseName });
    lastProbe = null;
    flash("");
    redraw();
  } catch (err) {
    flash(err instanceof Error ? err.message : String(err));
  }
}

app.addEventListener("submit", (ev) => {
  ev.preventDefault();
  if (!session) return;
  const form = ev.target as HTMLFormElement;
  void handleSubmit(form).catch((err: unknown) => {
    if (err instanceof ApiError && err.status === 409) {
      flash("this session is finalized; refresh shows the read-only record");
    } else {
      flash(err instanceof Error ? err.message : String(err));
    }
  });
});

async function handleSubmit(form: HTMLFormElement): Promise<void> {
  if (!session) return;
  const data = new FormData(form);

  if (form.classList.contains("answer-form")) {
    const index = Number(form.dataset.index);
    session = await api.answer(session.session_id, index, String(data.get("text") ?? ""));
  } else if (form.id === "whatif-form") {
    const changes: Record<string, number | string> = {};
    for (const spec of session.schema) {
      const raw = String(data.get(spec.name) ?? "").trim();
      if (raw === "") continue;
      const parsed = coerceValue(spec, raw);
      if ("error" in parsed) {
        flash(parsed.error);
        return;
      }
      changes[spec.name] = parsed.value;
    }
    const problems = validateChanges(session, changes);
    if (problems.length > 0) {
      flash(problems.join("; "));
      return;
    }
    const probe = await api.whatif(session.session_id, changes);
    lastProbe = { changes, ...probe };
    session = await api.getSession(session.session_id);
  } else if (form.id === "decision-form") {
    session = await api.decide(
      session.session_id,
      String(data.get("chosen") ?? ""),
      String(data.get("rationale") ?? ""),
    );
  }
  flash("");
  redraw();
}

// surface schema hints for screen readers on focus
app.addEventListener("focusin", (ev) => {
  if (!session) return;
  const input = ev.target as HTMLInputElement;
  if (input.form?.id === "whatif-form") {
    const spec = specFor(session, input.name);
    if (spec && !spec.mutable) {
      flash(`${spec.name} cannot change in practice; probing it is hypothetical`, false);
    }
  }
});

void boot().catch((err: unknown) =>
  flash(`service unreachable: ${err instanceof Error ? err.message : String(err)}`),
);
