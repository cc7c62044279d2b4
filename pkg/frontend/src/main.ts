/** Hash router wiring the four views into the #app element. */

import { renderChat } from './views/chat.js';
import { renderDashboard } from './views/dashboard.js';
import { renderReplay } from './views/replay.js';
import { renderSessionList } from './views/sessionList.js';

const SESSION_ROUTE = /^#\/sessions\/([^/]+)\/(replay|chat)$/;

export function route(root: HTMLElement, hash: string): Promise<void> {
  const session = SESSION_ROUTE.exec(hash);
  if (session) {
    const [, sessionId, view] = session;
    return view === 'replay'
      ? renderReplay(root, decodeURIComponent(sessionId!))
      : renderChat(root, decodeURIComponent(sessionId!));
  }
  if (hash === '#/dashboard') {
    return renderDashboard(root);
  }
  return renderSessionList(root);
}

function markActiveNav(hash: string): void {
  for (const link of document.querySelectorAll<HTMLAnchorElement>('nav a')) {
    link.classList.toggle(
      'active',
      hash.startsWith(link.getAttribute('href') ?? ''),
    );
  }
}

export function initApp(root: HTMLElement): void {
  const render = () => {
    const hash = window.location.hash || '#/sessions';
    markActiveNav(hash);
    void route(root, hash);
  };
  window.addEventListener('hashchange', render);
  render();
}

const appRoot = document.getElementById('app');
if (appRoot) {
  initApp(appRoot);
}
