// Thin typed client over the service endpoints. The fetch function is
// injectable so tests can run without a network or spawn a real server.

import type { Catalog, GraphDocument, JobRecord, LossRow, TrainSettings,
              ValidationReport } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function failure(res: Response): Promise<ApiError> {
  let detail = res.statusText;
  try {
    const body = await res.json() as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(res.status, detail);
}

export class ApiClient {
  constructor(public baseUrl: string,
              private fetchFn: FetchLike = fetch.bind(globalThis)) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async symbols(): Promise<Catalog> {
    const res = await this.fetchFn(this.url("/api/symbols"));
    if (!res.ok) throw await failure(res);
    return await res.json() as Catalog;
  }

  async validate(documentText: string): Promise<ValidationReport> {
    const res = await this.fetchFn(this.url("/api/validate"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: documentText,
    });
    if (!res.ok) throw await failure(res);
    return await res.json() as ValidationReport;
  }

  async submitJob(document: GraphDocument, config: TrainSettings,
                  inlineCsv: string): Promise<string> {
    const res = await this.fetchFn(this.url("/api/jobs"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ document, config, dataset: { inline_csv: inlineCsv } }),
    });
    if (!res.ok) throw await failure(res);
    const body = await res.json() as { id: string };
    return body.id;
  }

  async job(id: string): Promise<JobRecord> {
    const res = await this.fetchFn(this.url(`/api/jobs/${id}`));
    if (!res.ok) throw await failure(res);
    return await res.json() as JobRecord;
  }

  async lossRows(id: string, from: number): Promise<LossRow[]> {
    const res = await this.fetchFn(this.url(`/api/jobs/${id}/loss?from=${from}`));
    if (!res.ok) throw await failure(res);
    const body = await res.json() as { rows: LossRow[] };
    return body.rows;
  }

  checkpointUrl(id: string): string {
    return this.url(`/api/jobs/${id}/checkpoint`);
  }
}
