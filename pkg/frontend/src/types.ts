// Shapes mirrored from the annotation REST API. The server never sends
// dataset labels; none of these carry one for a task.

export type Label = 'SUPPORTED' | 'REFUTED' | 'NEI';

export const LABELS: Label[] = ['SUPPORTED', 'REFUTED', 'NEI'];

export interface AnnotationTask {
  pair_id: string;
  claim: string;
  evidence: string;
}

export interface AnnotationSubmission {
  pair_id: string;
  annotator: string;
  label: Label;
  grammar_flag: boolean;
}

export interface Progress {
  done: number;
  total: number;
}

export interface AgreementEntry {
  annotator_a: string;
  annotator_b: string;
  n_items: number;
  kappa: number;
  observed_agreement: number;
}

export interface AgreementReport {
  pairwise: AgreementEntry[];
  vs_dataset: AgreementEntry[];
}
