/** Client-side narrowing of the session list by demographic and outcome. */

import type { SessionSummary } from './types.js';

export const ANY = 'all';

export interface Filters {
  gender: string;
  income_bin: string;
  outcome: string;
}

export const NO_FILTERS: Filters = {
  gender: ANY,
  income_bin: ANY,
  outcome: ANY,
};

export function applyFilters(
  sessions: SessionSummary[],
  filters: Filters,
): SessionSummary[] {
  return sessions.filter(
    (s) =>
      (filters.gender === ANY || s.gender === filters.gender) &&
      (filters.income_bin === ANY || s.income_bin === filters.income_bin) &&
      (filters.outcome === ANY || s.outcome === filters.outcome),
  );
}

/** Distinct values of one summary field, in order of first appearance. */
export function filterOptions(
  sessions: SessionSummary[],
  field: 'gender' | 'income_bin' | 'outcome',
): string[] {
  const seen: string[] = [];
  for (const session of sessions) {
    if (!seen.includes(session[field])) seen.push(session[field]);
  }
  return seen;
}
