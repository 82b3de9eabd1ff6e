import { ReferenceCandidate } from './api';

/** One completed repair: which reference produced which result image. */
export interface HistoryEntry {
  readonly referenceId: string;
  readonly resultUrl: string;
  readonly jobId: string;
}

/**
 * Client-side session state. At most one job may be in flight at a time;
 * completed runs accumulate in an immutable history so results obtained
 * with different references can be compared side by side.
 */
export class SessionState {
  imageId: string | null = null;
  candidates: ReferenceCandidate[] = [];
  selectedReference: string | null = null;
  private inFlightJob: string | null = null;
  private readonly entries: HistoryEntry[] = [];

  get busy(): boolean {
    return this.inFlightJob !== null;
  }

  get history(): readonly HistoryEntry[] {
    return this.entries;
  }

  startJob(jobId: string): void {
    if (this.inFlightJob !== null) {
      throw new Error('a repair is already running');
    }
    this.inFlightJob = jobId;
  }

  finishJob(referenceId: string, resultUrl: string): HistoryEntry {
    if (this.inFlightJob === null) {
      throw new Error('no job in flight');
    }
    const entry: HistoryEntry = Object.freeze({
      referenceId,
      resultUrl,
      jobId: this.inFlightJob,
    });
    this.entries.push(entry);
    this.inFlightJob = null;
    return entry;
  }

  failJob(): void {
    this.inFlightJob = null;
  }

  reset(): void {
    this.imageId = null;
    this.candidates = [];
    this.selectedReference = null;
    this.inFlightJob = null;
    this.entries.length = 0;
  }
}
