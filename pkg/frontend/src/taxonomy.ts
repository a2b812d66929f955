// Display names for the ten question types, and which of them ask the
// decision-maker to construct something new rather than analyse what is
// already on screen.  The service sends only the type id with each
// question; the console owns the presentation.

import type { QuestionTypeId } from "./types.js";

export const TYPE_NAMES: Record<QuestionTypeId, string> = {
  Q1: "Case Information",
  Q2: "Relevance of Data",
  Q3: "Dataset",
  Q4: "Causal Structure of Recommendation",
  Q5: "Alternatives to Recommendation",
  Q6: "Assumptions and Expectations of Decision-Maker",
  Q7: "Stakeholder Preferences",
  Q8: "Consequences of Decision",
  Q9: "Change Intervention",
  Q10: "Model Behaviour",
};

const CREATING = new Set<QuestionTypeId>(["Q5", "Q7", "Q8", "Q9"]);

export function isCreating(qtype: QuestionTypeId): boolean {
  return CREATING.has(qtype);
}

export function typeName(qtype: QuestionTypeId): string {
  return TYPE_NAMES[qtype] ?? qtype;
}
