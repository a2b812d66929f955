// Wire types for the reflection service, mirrored from its JSON bodies.

export type QuestionTypeId =
  | "Q1" | "Q2" | "Q3" | "Q4" | "Q5" | "Q6" | "Q7" | "Q8" | "Q9" | "Q10";

export interface FeatureSpec {
  name: string;
  kind: "numeric" | "categorical";
  unit: string;
  mutable: boolean;
  range?: [number, number]; // numeric features
  categories?: string[];    // categorical features
}

export interface CaseBody {
  values: Record<string, number | string | null>; // null marks a missing value
  context_tags: string[];
  stakeholder_prefs: Record<string, string>;
  operator_prior: string | null;
}

export interface Recommendation {
  predicted: string;
  scores: Record<string, number>;
  margin: number;
}

export interface Question {
  template_id: string;
  qtype: QuestionTypeId;
  text: string;
  rationale: string;
  evidence_refs: string[];
  score: number;
}

export interface EvidenceItem {
  kind: string; // e.g. "feature_contribution", "partial_dependence"
  payload: Record<string, unknown>;
}

export type EvidenceMap = Record<string, EvidenceItem>;

export interface WhatifEntry {
  changes: Record<string, number | string>;
  result: Recommendation;
  extra_questions: Question[];
  evidence: EvidenceMap;
}

export interface Decision {
  chosen: string;
  rationale: string;
  unanswered: number;
}

export interface SessionBody {
  session_id: string;
  created_at: string;
  status: "open" | "finalized";
  model_name: string | null;
  model_ref: string;
  outcome_labels: string[];
  schema: FeatureSpec[];
  case: CaseBody;
  config: Record<string, unknown>;
  policy: Record<string, unknown>;
  packs: string[];
  recommendation: Recommendation | null;
  questions: Question[];
  evidence: EvidenceMap;
  skipped: string[];
  responses: Record<string, string>; // question index (as string) -> answer
  whatifs: WhatifEntry[];
  decision: Decision | null;
}

export interface ModelSummary {
  name: string;
  description: string;
  outcome_labels: string[];
  schema: FeatureSpec[];
  packs: string[];
  config: Record<string, unknown>;
  policy: Record<string, unknown>;
  sample_cases: Record<string, CaseBody>;
}

export interface WhatifResponse {
  result: Recommendation;
  extra_questions: Question[];
  evidence: EvidenceMap;
}

export interface ErrorBody {
  error: string;   // machine code, e.g. "session_finalized"
  message: string;
  stage: string | null;
}
