// Annotation session state machine, kept free of DOM concerns so the
// whole flow is testable against a scripted or real server.
//
// States: idle -> annotating -> ... -> complete, with 'retry' entered on
// any network failure. One in-flight annotation is preserved across
// failures; the server store is otherwise the only source of truth.

import { ApiClient, ApiError } from './api.js';
import type {
  AgreementReport,
  AnnotationSubmission,
  AnnotationTask,
  Label,
  Progress,
} from './types.js';

export type SessionState = 'idle' | 'loading' | 'annotating' | 'retry' | 'complete';

export type KeyAction = 'select' | 'grammar' | 'submit' | 'none';

const KEY_LABELS: Record<string, Label> = {
  '1': 'SUPPORTED',
  '2': 'REFUTED',
  '3': 'NEI',
};

export class AnnotationSession {
  state: SessionState = 'idle';
  annotator = '';
  task: AnnotationTask | null = null;
  selectedLabel: Label | null = null;
  grammarFlag = false;
  progress: Progress = { done: 0, total: 0 };
  agreement: AgreementReport | null = null;
  lastError: string | null = null;

  private pending: AnnotationSubmission | null = null;
  private busy = false;
  private onChange: () => void;

  constructor(private api: ApiClient, onChange?: () => void) {
    this.onChange = onChange ?? (() => {});
  }

  /** Begin annotating under the given id; empty ids are rejected. */
  async start(annotator: string): Promise<void> {
    const trimmed = annotator.trim();
    if (!trimmed) {
      this.lastError = 'enter an annotator id';
      this.onChange();
      return;
    }
    this.annotator = trimmed;
    await this.advance();
  }

  /** Route a keystroke; returns what it did so callers can render hints. */
  handleKey(key: string): KeyAction {
    if (this.state !== 'annotating') return 'none';
    const label = KEY_LABELS[key];
    if (label) {
      this.selectLabel(label);
      return 'select';
    }
    if (key === 'g') {
      this.toggleGrammar();
      return 'grammar';
    }
    if (key === 'Enter') {
      void this.submit();
      return 'submit';
    }
    return 'none';
  }

  selectLabel(label: Label): void {
    if (this.state !== 'annotating') return;
    this.selectedLabel = label;
    this.onChange();
  }

  toggleGrammar(): void {
    if (this.state !== 'annotating') return;
    this.grammarFlag = !this.grammarFlag;
    this.onChange();
  }

  /** Send the current judgment, then advance to the next pair. */
  async submit(): Promise<void> {
    if (this.state !== 'annotating' || this.busy) return;
    if (!this.task || !this.selectedLabel) {
      this.lastError = 'pick a label first';
      this.onChange();
      return;
    }
    this.pending = {
      pair_id: this.task.pair_id,
      annotator: this.annotator,
      label: this.selectedLabel,
      grammar_flag: this.grammarFlag,
    };
    await this.flushPending();
  }

  /** Re-attempt whatever failed: an unsent annotation, else the fetch. */
  async retry(): Promise<void> {
    if (this.state !== 'retry' || this.busy) return;
    if (this.pending) {
      await this.flushPending();
    } else {
      await this.advance();
    }
  }

  private async flushPending(): Promise<void> {
    if (!this.pending) return;
    this.busy = true;
    this.state = 'loading';
    this.onChange();
    try {
      await this.api.submit(this.pending);
    } catch (err) {
      this.fail(err);
      return;
    }
    this.pending = null;
    this.busy = false;
    await this.advance();
  }

  private async advance(): Promise<void> {
    this.busy = true;
    this.state = 'loading';
    this.lastError = null;
    this.onChange();
    try {
      this.progress = await this.api.progress(this.annotator);
      const task = await this.api.nextTask(this.annotator);
      if (task === null) {
        this.agreement = await this.api.agreement();
        this.task = null;
        this.state = 'complete';
      } else {
        this.task = task;
        this.selectedLabel = null;
        this.grammarFlag = false;
        this.state = 'annotating';
      }
    } catch (err) {
      this.fail(err);
      return;
    }
    this.busy = false;
    this.onChange();
  }

  private fail(err: unknown): void {
    this.lastError = err instanceof ApiError ? err.message : String(err);
    this.state = 'retry';
    this.busy = false;
    this.onChange();
  }
}
