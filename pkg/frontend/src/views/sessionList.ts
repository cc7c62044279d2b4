/** Session browser: filterable table of every session in the batch. */

import { getSessions } from '../api.js';
import { esc, outcomeBadge, renderError, renderLoading } from '../dom.js';
import {
  ANY,
  applyFilters,
  filterOptions,
  NO_FILTERS,
  type Filters,
} from '../filters.js';
import type { SessionSummary } from '../types.js';

const FILTER_FIELDS = ['gender', 'income_bin', 'outcome'] as const;
const FILTER_LABELS = {
  gender: 'Gender',
  income_bin: 'Income',
  outcome: 'Outcome',
};

function select(
  field: (typeof FILTER_FIELDS)[number],
  options: string[],
  active: string,
): string {
  const opts = [ANY, ...options]
    .map(
      (value) =>
        `<option value="${esc(value)}"${value === active ? ' selected' : ''}>
          ${value === ANY ? 'All' : esc(value)}
        </option>`,
    )
    .join('');
  return `
    <label class="filter">
      ${FILTER_LABELS[field]}
      <select data-filter="${field}">${opts}</select>
    </label>`;
}

function rows(sessions: SessionSummary[]): string {
  if (!sessions.length) {
    return '<tr><td colspan="7" class="empty">No sessions match.</td></tr>';
  }
  return sessions
    .map(
      (s) => `
      <tr data-session="${esc(s.session_id)}">
        <td><code>${esc(s.session_id)}</code></td>
        <td>${esc(s.persona_name)}</td>
        <td>${s.age} / ${esc(s.gender)}</td>
        <td>${esc(s.income_bin)}</td>
        <td>${outcomeBadge(s.outcome)}</td>
        <td class="num">${s.actions}</td>
        <td class="links">
          <a href="#/sessions/${esc(s.session_id)}/replay">replay</a>
          <a href="#/sessions/${esc(s.session_id)}/chat">interview</a>
        </td>
      </tr>`,
    )
    .join('');
}

export async function renderSessionList(root: HTMLElement): Promise<void> {
  renderLoading(root, 'sessions');
  let sessions: SessionSummary[];
  let total: number;
  try {
    const list = await getSessions();
    sessions = list.sessions;
    total = list.total;
  } catch (err) {
    renderError(root, `Could not load sessions: ${String(err)}`, () => {
      void renderSessionList(root);
    });
    return;
  }

  const filters: Filters = { ...NO_FILTERS };
  root.innerHTML = `
    <section class="session-list">
      <header class="page-header">
        <h1>Sessions</h1>
        <span class="muted" data-count></span>
      </header>
      <div class="filters">
        ${FILTER_FIELDS.map((f) =>
          select(f, filterOptions(sessions, f), filters[f]),
        ).join('')}
      </div>
      <table class="sessions">
        <thead>
          <tr>
            <th>Session</th><th>Participant</th><th>Age / Gender</th>
            <th>Income</th><th>Outcome</th><th class="num">Actions</th><th></th>
          </tr>
        </thead>
        <tbody></tbody>
      </table>
    </section>`;

  const tbody = root.querySelector<HTMLElement>('tbody')!;
  const count = root.querySelector<HTMLElement>('[data-count]')!;
  const refresh = () => {
    const visible = applyFilters(sessions, filters);
    tbody.innerHTML = rows(visible);
    count.textContent = `${visible.length} of ${total} sessions`;
  };
  for (const el of root.querySelectorAll<HTMLSelectElement>('[data-filter]')) {
    el.addEventListener('change', () => {
      filters[el.dataset.filter as keyof Filters] = el.value;
      refresh();
    });
  }
  refresh();
}
