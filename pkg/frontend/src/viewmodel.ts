// Session-derived view logic with no DOM and no network: what-if input
// validation against the model schema, read-only state, and small helpers
// the renderers and the wiring share.

import type { FeatureSpec, Question, SessionBody } from "./types.js";

export function isReadOnly(session: SessionBody): boolean {
  return session.status === "finalized";
}

export function unansweredCount(session: SessionBody): number {
  return session.questions.length - Object.keys(session.responses).length;
}

export function specFor(session: SessionBody, feature: string): FeatureSpec | undefined {
  return session.schema.find((s) => s.name === feature);
}

/** Parse one raw form value for a feature; returns the typed value or an error. */
export function coerceValue(
  spec: FeatureSpec,
  raw: string,
): { value: number | string } | { error: string } {
  if (spec.kind === "numeric") {
    const value = Number(raw);
    if (raw.trim() === "" || !Number.isFinite(value)) {
      return { error: `${spec.name} needs a number` };
    }
    return { value };
  }
  return { value: raw };
}

/**
 * Validate a draft what-if against the schema, mirroring the service's own
 * rules so obviously-bad probes never leave the console: unknown features,
 * unset values, out-of-range numbers, unknown categories.
 */
export function validateChanges(
  session: SessionBody,
  changes: Record<string, number | string | null>,
): string[] {
  const problems: string[] = [];
  for (const [name, value] of Object.entries(changes)) {
    const spec = specFor(session, name);
    if (!spec) {
      problems.push(`'${name}' is not a feature of this model`);
      continue;
    }
    if (value === null) {
      problems.push(`'${name}' cannot be unset in a what-if`);
      continue;
    }
    if (spec.kind === "numeric") {
      if (typeof value !== "number" || !Number.isFinite(value)) {
        problems.push(`'${name}' must be numeric`);
      } else if (spec.range && (value < spec.range[0] || value > spec.range[1])) {
        problems.push(
          `'${name}' must be between ${spec.range[0]} and ${spec.range[1]}`,
        );
      }
    } else if (spec.categories && !spec.categories.includes(String(value))) {
      problems.push(
        `'${name}' must be one of: ${spec.categories.join(", ")}`,
      );
    }
  }
  if (problems.length === 0 && Object.keys(changes).length === 0) {
    problems.push("change at least one feature");
  }
  return problems;
}

/** Evidence ids cited by the chosen questions, in first-citation order. */
export function citedEvidenceIds(questions: Question[]): string[] {
  const seen: string[] = [];
  for (const q of questions) {
    for (const ref of q.evidence_refs) {
      if (!seen.includes(ref)) seen.push(ref);
    }
  }
  return seen;
}

/** Answered state for one question index. */
export function answerFor(session: SessionBody, index: number): string | undefined {
  return session.responses[String(index)];
}
