// Incremental loss polling with a resume cursor: every row is fetched exactly
// once, and a dropped request retries with backoff from the same cursor, so
// the chart never gains gaps or duplicates.

import type { ApiClient } from "./api.js";
import type { JobRecord, LossRow } from "./types.js";

export interface PollerEvents {
  onRows?: (rows: LossRow[]) => void;
  onState?: (record: JobRecord) => void;
  onDone?: (record: JobRecord) => void;
  onRetry?: (attempt: number, delayMs: number) => void;
}

export interface PollerOptions {
  intervalMs?: number;
  maxBackoffMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) =>
  new Promise<void>((resolve) => setTimeout(resolve, ms));

export class LossPoller {
  cursor = 0;
  rows: LossRow[] = [];
  private stopped = false;

  constructor(private api: ApiClient, private jobId: string,
              private events: PollerEvents = {},
              private options: PollerOptions = {}) {}

  stop() {
    this.stopped = true;
  }

  /** Poll until the job settles; resolves with the final record. */
  async run(): Promise<JobRecord> {
    const interval = this.options.intervalMs ?? 300;
    const maxBackoff = this.options.maxBackoffMs ?? 5000;
    const sleep = this.options.sleep ?? defaultSleep;
    let failures = 0;
    for (;;) {
      if (this.stopped) throw new Error("polling stopped");
      let record: JobRecord;
      try {
        const fresh = await this.api.lossRows(this.jobId, this.cursor);
        if (fresh.length > 0) {
          this.cursor += fresh.length;
          this.rows.push(...fresh);
          this.events.onRows?.(fresh);
        }
        record = await this.api.job(this.jobId);
        failures = 0;
      } catch {
        failures += 1;
        const delay = Math.min(interval * 2 ** failures, maxBackoff);
        this.events.onRetry?.(failures, delay);
        await sleep(delay);
        continue;
      }
      this.events.onState?.(record);
      if (record.state === "finished" || record.state === "failed") {
        // One last drain: rows appended between the two requests above.
        const tail = await this.api.lossRows(this.jobId, this.cursor);
        if (tail.length > 0) {
          this.cursor += tail.length;
          this.rows.push(...tail);
          this.events.onRows?.(tail);
        }
        this.events.onDone?.(record);
        return record;
      }
      await sleep(interval);
    }
  }
}
