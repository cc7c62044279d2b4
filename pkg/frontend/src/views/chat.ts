/** Interview chat: talk to a session's simulated participant. Replies stream
 *  in chunk by chunk; the transcript is kept per session for the lifetime of
 *  the page so navigating away and back does not lose the conversation. */

import { getSession, sendMessage, startInterview } from '../api.js';
import { esc, renderError, renderLoading } from '../dom.js';
import type { ChatTurn, PersonaView } from '../types.js';

interface OpenInterview {
  interviewId: string;
  turns: ChatTurn[];
}

const openInterviews = new Map<string, OpenInterview>();

/** Test hook: forget all open interviews. */
export function resetInterviews(): void {
  openInterviews.clear();
}

function turnHtml([speaker, text]: ChatTurn): string {
  const role = speaker === 'researcher' ? 'researcher' : 'agent';
  return `
    <div class="turn turn-${role}">
      <span class="speaker">${role === 'researcher' ? 'You' : 'Participant'}</span>
      <p class="bubble">${esc(text)}</p>
    </div>`;
}

function personaChips(persona: PersonaView): string {
  const chips = [
    `${persona.age} years`,
    persona.gender,
    `$${persona.income.toLocaleString('en-US')}`,
    persona.intent,
  ];
  return chips.map((c) => `<span class="chip">${esc(c)}</span>`).join('');
}

export async function renderChat(
  root: HTMLElement,
  sessionId: string,
): Promise<void> {
  renderLoading(root, 'interview');
  let open = openInterviews.get(sessionId);
  let personaHeader: string;
  try {
    const detail = await getSession(sessionId);
    personaHeader = `
      <h1>Interview with ${esc(detail.persona.name)}</h1>
      <div class="chips">${personaChips(detail.persona)}</div>`;
    if (!open) {
      const info = await startInterview(sessionId);
      open = { interviewId: info.interview_id, turns: [...info.turns] };
      openInterviews.set(sessionId, open);
    }
  } catch (err) {
    renderError(root, `Could not start the interview: ${String(err)}`, () => {
      void renderChat(root, sessionId);
    });
    return;
  }

  root.innerHTML = `
    <section class="chat">
      <header class="page-header">${personaHeader}</header>
      <div class="turns" data-turns></div>
      <form class="composer" data-composer>
        <input type="text" name="question" autocomplete="off"
               placeholder="Ask about the session&hellip;" />
        <button type="submit">Send</button>
      </form>
    </section>`;

  const turnsEl = root.querySelector<HTMLElement>('[data-turns]')!;
  const form = root.querySelector<HTMLFormElement>('[data-composer]')!;
  const input = root.querySelector<HTMLInputElement>('input[name=question]')!;
  const send = root.querySelector<HTMLButtonElement>('button[type=submit]')!;

  const paint = () => {
    turnsEl.innerHTML = open.turns.map(turnHtml).join('');
    turnsEl.scrollTop = turnsEl.scrollHeight;
  };
  paint();

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    const question = input.value.trim();
    if (!question || send.disabled) return;
    input.value = '';
    send.disabled = true;

    open.turns.push(['researcher', question]);
    paint();
    const streaming = document.createElement('div');
    streaming.className = 'turn turn-agent streaming';
    streaming.innerHTML =
      '<span class="speaker">Participant</span><p class="bubble"></p>';
    turnsEl.appendChild(streaming);
    const bubble = streaming.querySelector<HTMLElement>('.bubble')!;

    void (async () => {
      let reply = '';
      let failed = false;
      try {
        for await (const event of sendMessage(open.interviewId, question)) {
          if ('chunk' in event) {
            reply += event.chunk;
            bubble.textContent = reply;
          } else {
            reply = event.reply;
            failed = event.error;
          }
        }
      } catch (err) {
        reply = `(The interview request failed: ${String(err)})`;
        failed = true;
      }
      open.turns.push(['agent', reply]);
      send.disabled = false;
      paint();
      if (failed) {
        turnsEl.lastElementChild?.classList.add('failed');
      }
    })();
  });
}
