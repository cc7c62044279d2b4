/** Trace replay: step through a session one action at a time, with the
 *  screenshot taken after each action and the memories recorded before it. */

import { apiUrl, getMemories, getSession } from '../api.js';
import { esc, money, outcomeBadge, renderError, renderLoading } from '../dom.js';
import { buildTraceSteps, type ReplayModel } from '../trace.js';
import type { MemoryView, SessionDetail } from '../types.js';

function memoryItems(memories: MemoryView[]): string {
  if (!memories.length) {
    return '<li class="empty">No memories at this step.</li>';
  }
  return memories
    .map(
      (m) => `
      <li class="memory memory-${esc(m.kind)}">
        <span class="memory-kind">${esc(m.kind)}</span>
        <span class="memory-importance" title="importance">${m.importance}</span>
        <span class="memory-text">${esc(m.text)}</span>
      </li>`,
    )
    .join('');
}

function outcomeLine(detail: SessionDetail): string {
  const outcome = detail.outcome;
  const extra =
    outcome.kind === 'purchased'
      ? ` &middot; total ${esc(money(outcome.total))}`
      : outcome.detail
        ? ` &middot; ${esc(outcome.detail)}`
        : '';
  return `${outcomeBadge(outcome.kind)}${extra}`;
}

export async function renderReplay(
  root: HTMLElement,
  sessionId: string,
): Promise<void> {
  renderLoading(root, `session ${sessionId}`);
  let detail: SessionDetail;
  let model: ReplayModel;
  try {
    detail = await getSession(sessionId);
    model = buildTraceSteps(detail, (await getMemories(sessionId)).memories);
  } catch (err) {
    renderError(root, `Could not load the trace: ${String(err)}`, () => {
      void renderReplay(root, sessionId);
    });
    return;
  }

  if (!model.steps.length) {
    root.innerHTML = `
      <section class="replay">
        <header class="page-header">
          <h1>${esc(detail.persona.name)}</h1>
          <span>${outcomeLine(detail)}</span>
        </header>
        <p class="empty">This session executed no actions.</p>
        <ul class="memories">${memoryItems(model.after)}</ul>
      </section>`;
    return;
  }

  let current = 0; // zero-based index into model.steps
  root.innerHTML = `
    <section class="replay">
      <header class="page-header">
        <h1>${esc(detail.persona.name)} &mdash; <code>${esc(sessionId)}</code></h1>
        <span>${outcomeLine(detail)}</span>
      </header>
      <div class="replay-body">
        <figure class="screenshot-pane">
          <img class="screenshot" alt="" />
          <figcaption class="action-caption"></figcaption>
        </figure>
        <aside class="memory-pane">
          <h2>Memories</h2>
          <ul class="memories" data-step-memories></ul>
          <div data-after hidden>
            <h2>After the last action</h2>
            <ul class="memories" data-after-memories></ul>
          </div>
        </aside>
      </div>
      <nav class="stepper">
        <button type="button" data-prev>&larr; Prev</button>
        <span class="step-label" data-step-label></span>
        <button type="button" data-next>Next &rarr;</button>
      </nav>
    </section>`;

  const img = root.querySelector<HTMLImageElement>('.screenshot')!;
  const caption = root.querySelector<HTMLElement>('.action-caption')!;
  const stepMemories = root.querySelector<HTMLElement>('[data-step-memories]')!;
  const afterBlock = root.querySelector<HTMLElement>('[data-after]')!;
  const afterMemories = root.querySelector<HTMLElement>('[data-after-memories]')!;
  const label = root.querySelector<HTMLElement>('[data-step-label]')!;
  const prev = root.querySelector<HTMLButtonElement>('[data-prev]')!;
  const next = root.querySelector<HTMLButtonElement>('[data-next]')!;

  afterMemories.innerHTML = memoryItems(model.after);

  const show = () => {
    const step = model.steps[current]!;
    img.src = step.screenshotUrl ? apiUrl(step.screenshotUrl) : '';
    img.alt = `Screenshot after action ${step.index}`;
    const result = step.action.ok
      ? ''
      : `<span class="action-error">${esc(step.action.error_message ?? 'failed')}</span>`;
    caption.innerHTML = `
      <strong>Action ${step.index} of ${model.steps.length}</strong>
      (${esc(step.action.kind)}): ${esc(step.action.description)} ${result}`;
    stepMemories.innerHTML = memoryItems(step.memories);
    label.textContent = `Step ${step.index} / ${model.steps.length}`;
    prev.disabled = current === 0;
    next.disabled = current === model.steps.length - 1;
    afterBlock.hidden = !(
      current === model.steps.length - 1 && model.after.length > 0
    );
  };
  prev.addEventListener('click', () => {
    if (current > 0) {
      current -= 1;
      show();
    }
  });
  next.addEventListener('click', () => {
    if (current < model.steps.length - 1) {
      current += 1;
      show();
    }
  });
  show();
}
