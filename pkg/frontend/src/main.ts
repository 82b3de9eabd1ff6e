import { ApiClient, ApiError } from './api';
import { pollJob } from './poll';
import { SessionState } from './state';
import {
  renderComparison,
  renderDownload,
  renderGallery,
  renderHistory,
  renderProgress,
  showErrorBanner,
} from './ui';

/**
 * Wire the page together. The element ids match index.html; everything the
 * app does to server state goes through the ApiClient (/v1 endpoints only).
 */
export function mountApp(root: Document, api = new ApiClient()): SessionState {
  const state = new SessionState();
  const $ = (id: string) => {
    const node = root.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as HTMLElement;
  };

  const banner = $('banners');
  const gallery = $('gallery');
  const progress = $('progress');
  const comparison = $('comparison');
  const historyStrip = $('history');
  const download = $('download');
  const runButton = $('run') as HTMLButtonElement;
  const photoInput = $('photo') as HTMLInputElement;
  const referenceInput = $('reference-upload') as HTMLInputElement;

  const fail = (err: unknown) => {
    const message =
      err instanceof ApiError || err instanceof Error
        ? err.message
        : String(err);
    showErrorBanner(banner, message);
  };

  const refresh = () => {
    runButton.disabled = state.busy || state.imageId === null;
    renderHistory(historyStrip, state.history, (entry) => {
      renderDownload(download, entry.resultUrl);
    });
  };

  photoInput.addEventListener('change', async () => {
    const file = photoInput.files?.[0];
    if (!file) return;
    try {
      state.imageId = await api.uploadImage(file);
      state.candidates = await api.references(state.imageId, 5);
      renderGallery(gallery, state.candidates, (id) => {
        state.selectedReference = id;
      });
    } catch (err) {
      fail(err);
    }
    refresh();
  });

  referenceInput.addEventListener('change', async () => {
    const file = referenceInput.files?.[0];
    if (!file) return;
    try {
      state.selectedReference = await api.uploadImage(file);
    } catch (err) {
      fail(err);
    }
  });

  runButton.addEventListener('click', async () => {
    if (state.busy || state.imageId === null) return;
    try {
      const jobId = await api.submitRepair({
        image: state.imageId,
        reference: state.selectedReference ?? undefined,
      });
      state.startJob(jobId);
      refresh();
      const final = await pollJob(api, jobId, {
        onTick: (s) => renderProgress(progress, s.state),
      });
      const resultUrl = api.resultUrl(final.result!);
      const entry = state.finishJob(
        state.selectedReference ?? 'auto',
        resultUrl,
      );
      renderComparison(comparison, {
        input: root.getElementById('input-preview')?.getAttribute('src') ?? '',
        restored: resultUrl,
        result: resultUrl,
      });
      renderDownload(download, entry.resultUrl);
    } catch (err) {
      state.failJob();
      fail(err);
    }
    refresh();
  });

  refresh();
  return state;
}

declare global {
  interface Window {
    __photorevive?: SessionState;
  }
}

if (typeof window !== 'undefined' && window.document.getElementById('run')) {
  window.__photorevive = mountApp(window.document);
}
