// Pure string renderers: SessionBody in, HTML out.  No DOM access and no
// state, so the same functions serve the browser and the test suite.
//
// Question and answer text is rendered verbatim (HTML-escaped, never
// truncated, reworded, or summarized): the console's contract is that the
// decision-maker sees exactly the questions the service asked.

import { isCreating, typeName } from "./taxonomy.js";
import type {
  EvidenceItem,
  EvidenceMap,
  Question,
  Recommendation,
  SessionBody,
  WhatifEntry,
} from "./types.js";
import { answerFor, unansweredCount } from "./viewmodel.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const BLOCKS = "▁▂▃▄▅▆▇█";

/** Unicode block-character sparkline; one character per sample. */
export function sparkline(values: number[]): string {
  if (values.length === 0) return "";
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo;
  return values
    .map((v) => {
      const t = span === 0 ? 0 : (v - lo) / span;
      return BLOCKS[Math.min(BLOCKS.length - 1, Math.floor(t * BLOCKS.length))];
    })
    .join("");
}

function fmt(value: unknown): string {
  if (typeof value === "number") {
    return Number.isInteger(value) ? String(value) : value.toFixed(4);
  }
  return String(value);
}

// ---------------------------------------------------------------------------
// recommendation pane
// ---------------------------------------------------------------------------

export function renderRecommendation(session: SessionBody): string {
  const rec = session.recommendation;
  const rows: string[] = ['<section class="pane" id="recommendation-pane">'];
  rows.push("<h2>Recommendation</h2>");
  if (rec === null) {
    rows.push('<p class="no-rec">No recommendation was computed for this case.</p>');
  } else {
    rows.push(`<p class="predicted">${escapeHtml(rec.predicted)}</p>`);
    rows.push('<table class="scores"><tbody>');
    for (const label of session.outcome_labels) {
      const mark = label === rec.predicted ? " class=\"winner\"" : "";
      rows.push(
        `<tr${mark}><td>${escapeHtml(label)}</td>` +
          `<td>${(rec.scores[label] ?? 0).toFixed(3)}</td></tr>`,
      );
    }
    rows.push("</tbody></table>");
    rows.push(`<p class="margin">margin ${rec.margin.toFixed(3)}</p>`);
  }
  if (session.skipped.length > 0) {
    rows.push(
      `<p class="skipped">skipped stages: ${session.skipped.map(escapeHtml).join(", ")}</p>`,
    );
  }
  rows.push("</section>");
  return rows.join("\n");
}

// ---------------------------------------------------------------------------
// question pane
// ---------------------------------------------------------------------------

export function renderQuestion(
  q: Question,
  index: number,
  session: SessionBody,
  readOnly: boolean,
): string {
  const badge = isCreating(q.qtype)
    ? ' <span class="badge creating" title="asks you to construct an alternative">creating</span>'
    : "";
  const answer = answerFor(session, index);
  const parts = [
    `<li class="question" data-index="${index}" data-qtype="${q.qtype}">`,
    `<span class="qtype">${escapeHtml(typeName(q.qtype))}</span>${badge}`,
    `<p class="text">${escapeHtml(q.text)}</p>`,
    `<p class="rationale">${escapeHtml(q.rationale)}</p>`,
  ];
  if (q.evidence_refs.length > 0) {
    const links = q.evidence_refs
      .map(
        (ref) =>
          `<a href="#evidence-${escapeHtml(ref)}" class="evidence-ref">${escapeHtml(ref)}</a>`,
      )
      .join(" ");
    parts.push(`<p class="refs">evidence: ${links}</p>`);
  }
  if (answer !== undefined) {
    parts.push(`<p class="answer">answered: ${escapeHtml(answer)}</p>`);
  } else if (!readOnly) {
    parts.push(
      `<form class="answer-form" data-index="${index}">` +
        '<input name="text" placeholder="your reflection…">' +
        "<button>record</button></form>",
    );
  } else {
    parts.push('<p class="answer unanswered">not answered</p>');
  }
  parts.push("</li>");
  return parts.join("\n");
}

export function renderQuestions(session: SessionBody, readOnly: boolean): string {
  const items = session.questions
    .map((q, i) => renderQuestion(q, i, session, readOnly))
    .join("\n");
  return (
    '<section class="pane" id="question-pane">' +
    `<h2>Questions to reflect on (${session.questions.length})</h2>` +
    `<ol class="questions">\n${items}\n</ol></section>`
  );
}

// ---------------------------------------------------------------------------
// evidence inspector
// ---------------------------------------------------------------------------

function renderPayload(item: EvidenceItem): string {
  const p = item.payload;
  switch (item.kind) {
    case "feature_contribution":
    case "global_importance": {
      const values = p.values as Record<string, number>;
      const rows = Object.entries(values)
        .sort((a, b) => Math.abs(b[1]) - Math.abs(a[1]))
        .map(
          ([name, v]) =>
            `<tr><td>${escapeHtml(name)}</td><td>${v.toFixed(4)}</td></tr>`,
        )
        .join("");
      return `<table class="contributions"><tbody>${rows}</tbody></table>`;
    }
    case "partial_dependence": {
      const grid = p.grid as number[];
      const means = p.means as number[];
      return (
        `<p class="pd">${escapeHtml(String(p.feature))} ` +
        `<span class="spark">${sparkline(means)}</span> ` +
        `(${fmt(grid[0])} → ${fmt(grid[grid.length - 1])})</p>`
      );
    }
    case "boundary_proximity": {
      const delta = p.flip_delta;
      const moved =
        delta === null ? `set to ${fmt(p.new_value)}` : `shifted by ${fmt(delta)}`;
      return (
        `<p>${escapeHtml(String(p.feature))} ${moved} flips the outcome to ` +
        `${escapeHtml(String(p.new_outcome))}</p>`
      );
    }
    case "counterfactual": {
      const changes = Object.entries(p.changes as Record<string, unknown>)
        .map(([name, v]) => `${escapeHtml(name)} → ${fmt(v)}`)
        .join(", ");
      return `<p>${changes} <span class="distance">(distance ${fmt(p.distance)})</span></p>`;
    }
    default:
      return `<pre class="payload">${escapeHtml(JSON.stringify(p, null, 2))}</pre>`;
  }
}

export function renderEvidenceItem(id: string, item: EvidenceItem): string {
  return (
    `<li class="evidence" id="evidence-${escapeHtml(id)}">` +
    `<span class="eid">${escapeHtml(id)}</span> ` +
    `<span class="ekind">${escapeHtml(item.kind)}</span>` +
    renderPayload(item) +
    "</li>"
  );
}

export function renderEvidence(evidence: EvidenceMap): string {
  const items = Object.keys(evidence)
    .sort()
    .map((id) => renderEvidenceItem(id, evidence[id]))
    .join("\n");
  return (
    '<section class="pane" id="evidence-pane"><h2>Evidence</h2>' +
    `<ul class="evidence-list">\n${items}\n</ul></section>`
  );
}

// ---------------------------------------------------------------------------
// what-if pane
// ---------------------------------------------------------------------------

export function renderWhatifResult(entry: WhatifEntry | null, labels: string[]): string {
  if (entry === null) return '<p class="whatif-empty">no probe yet</p>';
  const changes = Object.entries(entry.changes)
    .map(([name, v]) => `${escapeHtml(name)} = ${fmt(v)}`)
    .join(", ");
  const rec: Recommendation = entry.result;
  const scoreRow = labels
    .map((l) => `${escapeHtml(l)} ${(rec.scores[l] ?? 0).toFixed(3)}`)
    .join(" · ");
  const extras = entry.extra_questions
    .map(
      (q) =>
        `<li class="extra-question">${escapeHtml(q.text)}` +
        (isCreating(q.qtype) ? ' <span class="badge creating">creating</span>' : "") +
        "</li>",
    )
    .join("\n");
  return (
    '<div class="whatif-result">' +
    `<p>with ${changes}: <strong>${escapeHtml(rec.predicted)}</strong> (${scoreRow})</p>` +
    (extras ? `<ul class="extra-questions">\n${extras}\n</ul>` : "") +
    "</div>"
  );
}

// ---------------------------------------------------------------------------
// decision bar
// ---------------------------------------------------------------------------

export function renderDecisionBar(session: SessionBody, auditUrl: string): string {
  const open = session.status === "open";
  const unanswered = unansweredCount(session);
  const parts = ['<footer class="decision-bar">'];
  if (open) {
    const options = session.outcome_labels
      .map((l) => `<option value="${escapeHtml(l)}">${escapeHtml(l)}</option>`)
      .join("");
    parts.push(
      `<span class="counter">${unanswered} of ${session.questions.length} questions unanswered</span>`,
      `<form id="decision-form"><select name="chosen">${options}</select>` +
        '<input name="rationale" placeholder="why this outcome?">' +
        "<button>finalize decision</button></form>",
    );
  } else {
    const d = session.decision;
    parts.push(
      '<span class="finalized">finalized</span>',
      `<span class="chosen">decision: <strong>${escapeHtml(d?.chosen ?? "")}</strong></span>`,
      `<span class="rationale">${escapeHtml(d?.rationale ?? "")}</span>`,
      `<span class="counter">${d?.unanswered ?? unanswered} question(s) left unanswered</span>`,
    );
  }
  parts.push(`<a class="audit-link" href="${escapeHtml(auditUrl)}">audit log</a>`);
  parts.push("</footer>");
  return parts.join("\n");
}
