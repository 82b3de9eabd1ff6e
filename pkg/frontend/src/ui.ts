import { ReferenceCandidate } from './api';
import { HistoryEntry } from './state';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Gallery of reference candidates, in exactly the order the API returned. */
export function renderGallery(
  container: HTMLElement,
  candidates: ReferenceCandidate[],
  onPick: (id: string) => void,
): void {
  container.replaceChildren();
  if (candidates.length === 0) {
    container.append(el('p', 'gallery-empty', 'No reference candidates yet.'));
    return;
  }
  for (const c of candidates) {
    const card = el('figure', 'gallery-card');
    card.dataset.referenceId = c.id;
    const img = el('img', 'gallery-thumb');
    img.src = c.thumbnail;
    img.alt = `reference ${c.id}`;
    const caption = el(
      'figcaption',
      'gallery-caption',
      `#${c.rank} · ${c.score.toFixed(3)}`,
    );
    const use = el('button', 'gallery-use', 'Use this');
    use.addEventListener('click', () => onPick(c.id));
    card.append(img, caption, use);
    container.append(card);
  }
}

/** Job progress line; `state` comes straight from the poll loop. */
export function renderProgress(container: HTMLElement, state: string): void {
  container.replaceChildren(el('span', `progress progress-${state}`, state));
}

/**
 * Before/after comparison with a draggable divider. Two toggles reflect the
 * two pipeline stages: input vs final result, and restored grayscale vs
 * colorized result.
 */
export function renderComparison(
  container: HTMLElement,
  pairs: { input: string; restored: string; result: string },
): void {
  container.replaceChildren();
  const wrap = el('div', 'compare');
  const before = el('img', 'compare-before');
  const after = el('img', 'compare-after');
  before.src = pairs.input;
  after.src = pairs.result;
  const slider = el('input', 'compare-slider') as HTMLInputElement;
  slider.type = 'range';
  slider.min = '0';
  slider.max = '100';
  slider.value = '50';
  slider.addEventListener('input', () => {
    before.style.clipPath = `inset(0 ${100 - Number(slider.value)}% 0 0)`;
  });

  const modes: Array<[string, string, string]> = [
    ['input vs result', pairs.input, pairs.result],
    ['restored vs colorized', pairs.restored, pairs.result],
  ];
  const toggles = el('div', 'compare-toggles');
  for (const [label, beforeSrc, afterSrc] of modes) {
    const btn = el('button', 'compare-toggle', label);
    btn.addEventListener('click', () => {
      before.src = beforeSrc;
      after.src = afterSrc;
    });
    toggles.append(btn);
  }
  wrap.append(after, before, slider);
  container.append(wrap, toggles);
}

/** History strip: one immutable card per completed run. */
export function renderHistory(
  container: HTMLElement,
  entries: readonly HistoryEntry[],
  onOpen: (entry: HistoryEntry) => void,
): void {
  container.replaceChildren();
  for (const entry of entries) {
    const card = el('figure', 'history-card');
    card.dataset.jobId = entry.jobId;
    const img = el('img', 'history-thumb');
    img.src = entry.resultUrl;
    img.alt = `result with ${entry.referenceId}`;
    const caption = el('figcaption', 'history-caption', entry.referenceId);
    card.addEventListener('click', () => onOpen(entry));
    card.append(img, caption);
    container.append(card);
  }
}

/** Dismissible error banner. */
export function showErrorBanner(container: HTMLElement, message: string): void {
  const banner = el('div', 'error-banner');
  banner.setAttribute('role', 'alert');
  banner.append(el('span', 'error-message', message));
  const dismiss = el('button', 'error-dismiss', '×');
  dismiss.addEventListener('click', () => banner.remove());
  banner.append(dismiss);
  container.append(banner);
}

/** Download link for the currently shown result. */
export function renderDownload(container: HTMLElement, url: string): void {
  container.replaceChildren();
  const a = el('a', 'download-link', 'Download result');
  a.href = url;
  a.setAttribute('download', 'repaired.png');
  container.append(a);
}
