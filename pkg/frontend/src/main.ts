// DOM wiring for the annotation page. All behavior lives in
// AnnotationSession; this file only renders its state and forwards
// input events.

import { ApiClient } from './api.js';
import { AnnotationSession } from './flow.js';
import { LABELS, type AgreementEntry, type Label } from './types.js';

const api = new ApiClient('');
const session = new AnnotationSession(api, render);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function agreementRows(entries: AgreementEntry[]): string {
  return entries
    .map(
      (e) =>
        `<tr><td>${e.annotator_a}</td><td>${e.annotator_b}</td>` +
        `<td>${e.n_items}</td><td>${e.kappa.toFixed(4)}</td>` +
        `<td>${e.observed_agreement.toFixed(4)}</td></tr>`,
    )
    .join('');
}

function render(): void {
  el('enter-panel').hidden = session.state !== 'idle';
  el('task-panel').hidden = session.state !== 'annotating';
  el('retry-banner').hidden = session.state !== 'retry';
  el('complete-panel').hidden = session.state !== 'complete';
  el('loading-note').hidden = session.state !== 'loading';

  const { done, total } = session.progress;
  el('progress-text').textContent = `${done} / ${total}`;
  el<HTMLProgressElement>('progress-bar').max = Math.max(total, 1);
  el<HTMLProgressElement>('progress-bar').value = done;

  if (session.task) {
    el('claim-text').textContent = session.task.claim;
    el('evidence-text').textContent = session.task.evidence;
  }
  for (const label of LABELS) {
    el(`label-${label}`).classList.toggle('selected', session.selectedLabel === label);
  }
  el<HTMLInputElement>('grammar-flag').checked = session.grammarFlag;
  el('error-text').textContent = session.lastError ?? '';

  if (session.agreement) {
    el('agreement-pairwise').innerHTML = agreementRows(session.agreement.pairwise);
    el('agreement-dataset').innerHTML = agreementRows(session.agreement.vs_dataset);
  }
}

function bind(): void {
  el<HTMLFormElement>('enter-form').addEventListener('submit', (event) => {
    event.preventDefault();
    void session.start(el<HTMLInputElement>('annotator-input').value);
  });

  for (const label of LABELS) {
    el(`label-${label}`).addEventListener('click', () =>
      session.selectLabel(label as Label),
    );
  }
  el('grammar-flag').addEventListener('change', () => session.toggleGrammar());
  el('submit-button').addEventListener('click', () => void session.submit());
  el('retry-button').addEventListener('click', () => void session.retry());

  document.addEventListener('keydown', (event) => {
    // keep shortcuts away from the id field
    if (document.activeElement instanceof HTMLInputElement &&
        document.activeElement.type === 'text') {
      return;
    }
    session.handleKey(event.key);
  });

  render();
}

bind();
