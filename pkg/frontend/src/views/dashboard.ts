/** Aggregate dashboard: purchase stats per demographic group, straight from
 *  the service (the UI never recomputes aggregates). */

import { getStats } from '../api.js';
import { esc, money, renderError, renderLoading } from '../dom.js';
import type { StatRow } from '../types.js';

type GroupBy = 'income_bin' | 'gender';

function bar(value: number | null, max: number): string {
  if (value === null || max <= 0) return '';
  const width = Math.round((value / max) * 100);
  return `<span class="bar" style="width:${width}%"></span>`;
}

function rows(data: StatRow[]): string {
  const maxRate = Math.max(...data.map((r) => r.purchase_rate ?? 0), 0);
  return data
    .map(
      (r) => `
      <tr>
        <td>${esc(r.group)}</td>
        <td class="num">${r.count}</td>
        <td class="num rate">
          ${r.purchase_rate === null ? '-' : r.purchase_rate.toFixed(2)}
          ${bar(r.purchase_rate, maxRate)}
        </td>
        <td class="num">${money(r.mean_total)}</td>
        <td class="num">${r.mean_actions === null ? '-' : r.mean_actions.toFixed(1)}</td>
      </tr>`,
    )
    .join('');
}

export async function renderDashboard(
  root: HTMLElement,
  groupBy: GroupBy = 'income_bin',
): Promise<void> {
  renderLoading(root, 'aggregates');
  let data: StatRow[];
  try {
    data = (await getStats(groupBy)).rows;
  } catch (err) {
    renderError(root, `Could not load aggregates: ${String(err)}`, () => {
      void renderDashboard(root, groupBy);
    });
    return;
  }

  root.innerHTML = `
    <section class="dashboard">
      <header class="page-header">
        <h1>Aggregates</h1>
        <div class="group-toggle">
          <button type="button" data-group="income_bin"
            ${groupBy === 'income_bin' ? 'class="active"' : ''}>by income</button>
          <button type="button" data-group="gender"
            ${groupBy === 'gender' ? 'class="active"' : ''}>by gender</button>
        </div>
      </header>
      <table class="stats">
        <thead>
          <tr>
            <th>Group</th><th class="num">Sessions</th>
            <th class="num">Purchase rate</th>
            <th class="num">Mean total</th><th class="num">Mean actions</th>
          </tr>
        </thead>
        <tbody>${rows(data)}</tbody>
      </table>
    </section>`;

  for (const button of root.querySelectorAll<HTMLButtonElement>('[data-group]')) {
    button.addEventListener('click', () => {
      void renderDashboard(root, button.dataset.group as GroupBy);
    });
  }
}
