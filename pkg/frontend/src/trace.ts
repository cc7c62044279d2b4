/** Build replay steps from a session's actions, screenshots, and memories.
 *
 * The only computation done on memories is bucketing by action index:
 * a memory with step k was recorded before action k executed, so it shows
 * alongside that action. Memories with a step past the last action (the
 * wrap-up observation and reflection of a finished session) land in
 * `after`, displayed once the replay reaches the final step.
 */

import type { MemoryView, SessionDetail, TraceStep } from './types.js';

export interface ReplayModel {
  steps: TraceStep[];
  after: MemoryView[];
}

export function buildTraceSteps(
  detail: SessionDetail,
  memories: MemoryView[],
): ReplayModel {
  const count = detail.actions.length;
  const buckets = new Map<number, MemoryView[]>();
  const after: MemoryView[] = [];
  for (const memory of memories) {
    if (memory.step > count) {
      after.push(memory);
      continue;
    }
    const bucket = buckets.get(memory.step);
    if (bucket) {
      bucket.push(memory);
    } else {
      buckets.set(memory.step, [memory]);
    }
  }
  const steps = detail.actions.map((action, i) => ({
    index: i + 1,
    action,
    screenshotUrl: detail.screenshot_urls[i] ?? null,
    memories: buckets.get(i + 1) ?? [],
  }));
  return { steps, after };
}
