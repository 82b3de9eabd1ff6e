import { ApiClient, JobStatus } from './api';

export interface PollOptions {
  /** Initial polling interval; grows by `backoff` up to `maxIntervalMs`. */
  intervalMs?: number;
  backoff?: number;
  maxIntervalMs?: number;
  onTick?: (status: JobStatus) => void;
}

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

/**
 * Poll a repair job until it settles. Resolves with the final status when
 * the job is done; rejects when it failed. 1 s interval with gentle backoff
 * so long jobs don't hammer the service.
 */
export async function pollJob(
  api: ApiClient,
  jobId: string,
  opts: PollOptions = {},
): Promise<JobStatus> {
  const backoff = opts.backoff ?? 1.5;
  const maxInterval = opts.maxIntervalMs ?? 10_000;
  let interval = opts.intervalMs ?? 1_000;

  for (;;) {
    const status = await api.jobStatus(jobId);
    opts.onTick?.(status);
    if (status.state === 'done') return status;
    if (status.state === 'failed') {
      throw new Error(status.error ?? 'repair job failed');
    }
    await sleep(interval);
    interval = Math.min(interval * backoff, maxInterval);
  }
}
