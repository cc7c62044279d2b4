/** Typed client for the uxsim result service. All backend contact lives here. */

import type {
  InterviewInfo,
  MemoryTrace,
  SessionDetail,
  SessionList,
  StatsReply,
  StreamEvent,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
    public readonly detail: unknown = null,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

let apiBase: string | null = null;

/** Service origin: `?api=` query param wins, then sessionStorage, then the
 *  page's own origin (the service can host the built UI directly). */
export function resolveApiBase(): string {
  if (apiBase !== null) return apiBase;
  let base = '';
  try {
    const fromQuery = new URL(window.location.href).searchParams.get('api');
    if (fromQuery) {
      sessionStorage.setItem('uxsim.apiBase', fromQuery);
    }
    base = fromQuery ?? sessionStorage.getItem('uxsim.apiBase') ?? '';
  } catch {
    base = '';
  }
  apiBase = base.replace(/\/+$/, '');
  return apiBase;
}

/** Test hook / manual override. Pass null to re-resolve lazily. */
export function setApiBase(base: string | null): void {
  apiBase = base === null ? null : base.replace(/\/+$/, '');
}

export function apiUrl(path: string): string {
  return resolveApiBase() + path;
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(apiUrl(path), init);
  } catch (err) {
    throw new ApiError(0, `service unreachable: ${String(err)}`);
  }
  if (!response.ok) {
    let detail: unknown = null;
    try {
      detail = (await response.json()).detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(
      response.status,
      `${response.status} ${response.statusText || 'error'} for ${path}`,
      detail,
    );
  }
  return response.json() as Promise<T>;
}

export function getSessions(offset = 0, limit = 100): Promise<SessionList> {
  return request(`/sessions?offset=${offset}&limit=${limit}`);
}

export function getSession(sessionId: string): Promise<SessionDetail> {
  return request(`/sessions/${encodeURIComponent(sessionId)}`);
}

export function getMemories(sessionId: string): Promise<MemoryTrace> {
  return request(`/sessions/${encodeURIComponent(sessionId)}/memories`);
}

export function getStats(groupBy: 'income_bin' | 'gender'): Promise<StatsReply> {
  return request(`/stats?group_by=${groupBy}`);
}

export function startInterview(sessionId: string): Promise<InterviewInfo> {
  return request('/interviews', {
    method: 'POST',
    headers: { 'content-type': 'application/json' },
    body: JSON.stringify({ session_id: sessionId }),
  });
}

export function getInterview(interviewId: string): Promise<InterviewInfo> {
  return request(`/interviews/${encodeURIComponent(interviewId)}`);
}

/** Send one researcher message; yields the reply's NDJSON events in order. */
export async function* sendMessage(
  interviewId: string,
  text: string,
): AsyncGenerator<StreamEvent> {
  const path = `/interviews/${encodeURIComponent(interviewId)}/messages`;
  let response: Response;
  try {
    response = await fetch(apiUrl(path), {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ text }),
    });
  } catch (err) {
    throw new ApiError(0, `service unreachable: ${String(err)}`);
  }
  if (!response.ok) {
    let detail: unknown = null;
    try {
      detail = (await response.json()).detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, `${response.status} for ${path}`, detail);
  }
  if (!response.body) {
    throw new ApiError(0, 'response has no body to stream');
  }
  const reader = response.body.getReader();
  const decoder = new TextDecoder();
  let buffered = '';
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    buffered += decoder.decode(value, { stream: true });
    let newline: number;
    while ((newline = buffered.indexOf('\n')) >= 0) {
      const line = buffered.slice(0, newline).trim();
      buffered = buffered.slice(newline + 1);
      if (line) yield JSON.parse(line) as StreamEvent;
    }
  }
  const tail = buffered.trim();
  if (tail) yield JSON.parse(tail) as StreamEvent;
}
