/** Typed client for the repair service's /v1 JSON API. */

export const MAX_UPLOAD_BYTES = 25 * 1024 * 1024;

export interface ReferenceCandidate {
  id: string;
  score: number;
  rank: number;
  thumbnail: string;
}

export type JobState = 'queued' | 'running' | 'done' | 'failed';

export interface JobStatus {
  id: string;
  state: JobState;
  result: string | null;
  error: string | null;
}

export interface RepairParams {
  image: string;
  reference?: string;
  ref_rank?: number;
  restore_only?: boolean;
  colorize_only?: boolean;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<never> {
  let code = 'http_error';
  let message = `request failed (${resp.status})`;
  try {
    const body = await resp.json();
    if (body && body.code) {
      code = body.code;
      message = body.message ?? message;
    }
  } catch {
    // non-JSON error body; keep defaults
  }
  throw new ApiError(resp.status, code, message);
}

export class ApiClient {
  constructor(private readonly base = '') {}

  /** Upload a photo. Oversized files are blocked before any network I/O. */
  async uploadImage(file: File | Blob): Promise<string> {
    if (file.size > MAX_UPLOAD_BYTES) {
      throw new ApiError(413, 'too_large', 'file exceeds the 25 MB limit');
    }
    const form = new FormData();
    form.append('file', file);
    const resp = await fetch(`${this.base}/v1/images`, {
      method: 'POST',
      body: form,
    });
    if (!resp.ok) await parseError(resp);
    const body = await resp.json();
    return body.id as string;
  }

  async references(imageId: string, top = 5): Promise<ReferenceCandidate[]> {
    const params = new URLSearchParams({ image: imageId, top: String(top) });
    const resp = await fetch(`${this.base}/v1/references?${params}`);
    if (!resp.ok) await parseError(resp);
    const body = await resp.json();
    return body.references as ReferenceCandidate[];
  }

  async submitRepair(params: RepairParams): Promise<string> {
    const resp = await fetch(`${this.base}/v1/repairs`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(params),
    });
    if (!resp.ok) await parseError(resp);
    const body = await resp.json();
    return body.id as string;
  }

  async jobStatus(jobId: string): Promise<JobStatus> {
    const resp = await fetch(`${this.base}/v1/repairs/${jobId}`);
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as JobStatus;
  }

  resultUrl(path: string): string {
    return `${this.base}${path}`;
  }
}
