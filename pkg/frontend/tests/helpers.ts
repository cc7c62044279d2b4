/** Shared test fixtures and a route-based fetch stub standing in for the
 *  uxsim result service. */

import { vi } from 'vitest';
import type {
  ActionView,
  InterviewInfo,
  MemoryView,
  SessionDetail,
  SessionList,
  SessionSummary,
  StatsReply,
} from '../src/types.js';

// -- fixtures ---------------------------------------------------------------

export const SUMMARIES: SessionSummary[] = [
  {
    session_id: 'session_0001',
    persona_name: 'Maria Alvarez',
    age: 34,
    gender: 'female',
    income: 45000,
    income_bin: '$30k-$58k',
    outcome: 'purchased',
    actions: 5,
  },
  {
    session_id: 'session_0002',
    persona_name: 'Dev Patel',
    age: 51,
    gender: 'male',
    income: 160000,
    income_bin: '$153k-',
    outcome: 'terminated',
    actions: 2,
  },
  {
    session_id: 'session_0003',
    persona_name: 'Ann Lowe',
    age: 27,
    gender: 'female',
    income: 20000,
    income_bin: '$0-$30k',
    outcome: 'error',
    actions: 0,
  },
];

export const SESSION_LIST: SessionList = {
  total: SUMMARIES.length,
  sessions: SUMMARIES,
};

const ACTION_DESCRIPTIONS = [
  "Typing 'woman's jacket' into the search input field and submitting the form.",
  'Clicking on the product to view its details.',
  "Clicking on the 'Navy' color option for the jacket.",
  "Clicking on the 'Medium' size option for the jacket.",
  "Clicking on the 'Add to Cart' button to add the chosen product to the cart.",
];

function action(index: number, description: string): ActionView {
  return {
    index,
    kind: index === 1 ? 'type_and_submit' : 'click',
    target: index === 1 ? 'header.search_input' : 'product.option',
    text: index === 1 ? "woman's jacket" : null,
    description,
    ok: true,
    error_message: null,
    resulting_url: `http://shop.test/page${index}`,
  };
}

export const DETAIL: SessionDetail = {
  session_id: 'session_0001',
  persona: {
    name: 'Maria Alvarez',
    age: 34,
    gender: 'female',
    income: 45000,
    intent: 'buy a jacket',
    background: 'Freelance designer hunting a jacket.',
  },
  config: { max_steps: 40 },
  outcome: {
    kind: 'purchased',
    items: [['Fleece Jacket (Navy, Medium)', '39.99']],
    total: '39.99',
    detail: null,
  },
  actions: ACTION_DESCRIPTIONS.map((d, i) => action(i + 1, d)),
  screenshot_urls: [1, 2, 3, 4, 5].map(
    (k) => `/sessions/session_0001/screenshots/${k}`,
  ),
  started: '2026-08-25T10:00:00+00:00',
  ended: '2026-08-25T10:01:00+00:00',
};

export const MEMORIES: MemoryView[] = [
  mem(1, 'observation', 'The home page greets me.', 1, 5),
  mem(2, 'plan', 'I will search for a jacket.', 1, 6),
  mem(3, 'action', ACTION_DESCRIPTIONS[0]!, 1, 5),
  mem(4, 'observation', 'The results list several jackets.', 2, 5),
  mem(5, 'action', ACTION_DESCRIPTIONS[4]!, 5, 7),
  mem(6, 'reflection', 'The order went through within budget.', 6, 8),
];

function mem(
  id: number,
  kind: string,
  text: string,
  step: number,
  importance: number,
): MemoryView {
  return { id, kind, step, importance, text, line: `${kind}: ${text}` };
}

export const STATS: StatsReply = {
  group_by: 'income_bin',
  rows: [
    { group: '$0-$30k', count: 1, purchase_rate: 0.0, mean_total: null, mean_actions: 0.0 },
    { group: '$30k-$58k', count: 1, purchase_rate: 1.0, mean_total: '39.99', mean_actions: 5.0 },
    { group: '$58k-$94k', count: 0, purchase_rate: null, mean_total: null, mean_actions: null },
    { group: '$94k-$153k', count: 0, purchase_rate: null, mean_total: null, mean_actions: null },
    { group: '$153k-', count: 1, purchase_rate: 0.0, mean_total: null, mean_actions: 2.0 },
  ],
};

export const INTERVIEW: InterviewInfo = {
  interview_id: 'itv_abc123def456',
  session_id: 'session_0001',
  persona_name: 'Maria Alvarez',
  memory_count: 5,
  turns: [],
};

export const SCRIPTED_REPLY =
  'I settled on the hooded fleece jacket because it was the only one ' +
  'under forty dollars with the navy color I wanted.';

export function ndjsonReply(reply: string): string {
  const words = reply.split(' ');
  const lines: string[] = [];
  for (let start = 0; start < words.length; start += 8) {
    let chunk = words.slice(start, start + 8).join(' ');
    if (start + 8 < words.length) chunk += ' ';
    lines.push(JSON.stringify({ chunk }));
  }
  lines.push(JSON.stringify({ done: true, reply, error: false }));
  return lines.join('\n') + '\n';
}

// -- fetch stub ---------------------------------------------------------------

export interface RecordedRequest {
  method: string;
  path: string;
  body: unknown;
}

type Responder = (request: RecordedRequest) => Response;

export class ServiceStub {
  readonly requests: RecordedRequest[] = [];
  private routes: { method: string; pattern: RegExp; respond: Responder }[] =
    [];

  on(method: string, pattern: RegExp, respond: Responder): this {
    this.routes.push({ method: method.toUpperCase(), pattern, respond });
    return this;
  }

  json(method: string, pattern: RegExp, payload: unknown, status = 200): this {
    return this.on(method, pattern, () =>
      new Response(JSON.stringify(payload), {
        status,
        headers: { 'content-type': 'application/json' },
      }),
    );
  }

  ndjson(method: string, pattern: RegExp, body: string): this {
    return this.on(method, pattern, () =>
      new Response(body, {
        status: 200,
        headers: { 'content-type': 'application/x-ndjson' },
      }),
    );
  }

  install(): this {
    vi.stubGlobal('fetch', async (input: RequestInfo | URL, init?: RequestInit) => {
      const url = new URL(String(input), 'http://stub.test');
      const method = (init?.method ?? 'GET').toUpperCase();
      const recorded: RecordedRequest = {
        method,
        path: url.pathname + url.search,
        body: init?.body ? JSON.parse(String(init.body)) : null,
      };
      this.requests.push(recorded);
      for (const route of this.routes) {
        if (route.method === method && route.pattern.test(url.pathname)) {
          return route.respond(recorded);
        }
      }
      return new Response(JSON.stringify({ detail: 'no stub route' }), {
        status: 404,
        headers: { 'content-type': 'application/json' },
      });
    });
    return this;
  }
}

/** Stub covering the whole happy path used by most view tests. */
export function fullServiceStub(): ServiceStub {
  return new ServiceStub()
    .json('GET', /^\/sessions$/, SESSION_LIST)
    .json('GET', /^\/sessions\/session_0001$/, DETAIL)
    .json('GET', /^\/sessions\/session_0001\/memories$/, {
      session_id: 'session_0001',
      memories: MEMORIES,
      trace: MEMORIES.map((m) => m.line).join('\n'),
    })
    .json('GET', /^\/stats$/, STATS)
    .json('POST', /^\/interviews$/, INTERVIEW, 201)
    .ndjson(
      'POST',
      /^\/interviews\/itv_abc123def456\/messages$/,
      ndjsonReply(SCRIPTED_REPLY),
    )
    .install();
}

/** Poll until `predicate` holds; fails the test after ~2s. */
export async function waitFor(
  predicate: () => boolean,
  what = 'condition',
): Promise<void> {
  for (let i = 0; i < 200; i++) {
    if (predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
  throw new Error(`timed out waiting for ${what}`);
}
