/** Mirrors of the uxsim REST payloads, plus the view models built from them. */

export interface SessionSummary {
  session_id: string;
  persona_name: string;
  age: number;
  gender: string;
  income: number;
  income_bin: string;
  outcome: string;
  actions: number;
}

export interface SessionList {
  total: number;
  sessions: SessionSummary[];
}

export interface OutcomeView {
  kind: string;
  items: [string, string][];
  total: string | null;
  detail: string | null;
}

export interface ActionView {
  index: number;
  kind: string;
  target: string | null;
  text: string | null;
  description: string;
  ok: boolean;
  error_message: string | null;
  resulting_url: string;
}

export interface PersonaView {
  name: string;
  age: number;
  gender: string;
  income: number;
  intent: string;
  background: string;
}

export interface SessionDetail {
  session_id: string;
  persona: PersonaView;
  config: Record<string, unknown>;
  outcome: OutcomeView;
  actions: ActionView[];
  screenshot_urls: string[];
  started: string;
  ended: string;
}

export interface MemoryView {
  id: number;
  kind: string;
  step: number;
  importance: number;
  text: string;
  line: string;
}

export interface MemoryTrace {
  session_id: string;
  memories: MemoryView[];
  trace: string;
}

export interface StatRow {
  group: string;
  count: number;
  purchase_rate: number | null;
  mean_total: string | null;
  mean_actions: number | null;
}

export interface StatsReply {
  group_by: string;
  rows: StatRow[];
}

/** [speaker, text]; speaker is "researcher" or "agent". */
export type ChatTurn = [string, string];

export interface InterviewInfo {
  interview_id: string;
  session_id: string;
  persona_name: string;
  memory_count: number;
  turns: ChatTurn[];
}

/** One NDJSON line of a streaming interview reply. */
export type StreamEvent =
  | { chunk: string }
  | { done: true; reply: string; error: boolean };

/** One replay step: action k paired with screenshot k and the memories
 *  recorded before action k executed. */
export interface TraceStep {
  index: number;
  action: ActionView;
  screenshotUrl: string | null;
  memories: MemoryView[];
}
