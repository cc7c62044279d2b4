/** Small rendering helpers shared by the views. */

export function esc(value: unknown): string {
  return String(value ?? '')
    .replaceAll('&', '&amp;')
    .replaceAll('<', '&lt;')
    .replaceAll('>', '&gt;')
    .replaceAll('"', '&quot;')
    .replaceAll("'", '&#39;');
}

export function outcomeBadge(kind: string): string {
  return `<span class="badge badge-${esc(kind)}">${esc(kind)}</span>`;
}

export function money(total: string | null): string {
  return total === null ? '-' : `$${total}`;
}

/** Inline service-error banner with a retry button. */
export function renderError(
  root: HTMLElement,
  message: string,
  retry: () => void,
): void {
  root.innerHTML = `
    <div class="error-banner" role="alert">
      <span class="error-text">${esc(message)}</span>
      <button class="retry" type="button">Retry</button>
    </div>`;
  root.querySelector<HTMLButtonElement>('.retry')!.addEventListener(
    'click',
    retry,
  );
}

export function renderLoading(root: HTMLElement, what: string): void {
  root.innerHTML = `<div class="loading">Loading ${esc(what)}&hellip;</div>`;
}
