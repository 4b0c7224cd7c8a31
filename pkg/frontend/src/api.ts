// Thin typed client over the service API. The fetch implementation is
// injected so tests can run against a scripted server.

import type {
  CandidateSetDoc,
  CanvasSpec,
  GenerateRequestBody,
  HealthDoc,
  JobOut,
  LayoutDoc,
  RetargetResultDoc,
} from "./types.js";
import type { ElementDraft } from "./drafts.js";
import { draftsToPayload } from "./drafts.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface PollOptions {
  /** initial delay between polls, doubles up to maxIntervalMs */
  intervalMs?: number;
  maxIntervalMs?: number;
  timeoutMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) =>
  new Promise<void>((resolve) => setTimeout(resolve, ms));

export class ApiError extends Error {
  constructor(
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
    private base = "",
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(this.base + path, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = await res.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body, keep the status text
      }
      throw new ApiError(detail, res.status);
    }
    return (await res.json()) as T;
  }

  submitGeneration(
    drafts: ElementDraft[],
    canvas: CanvasSpec,
    opts: { k?: number; gridN?: number; seed?: number; idempotencyKey?: string } = {},
  ): Promise<JobOut> {
    const body: GenerateRequestBody = {
      elements: draftsToPayload(drafts),
      canvas,
      k: opts.k ?? 5,
      grid_n: opts.gridN ?? 8,
      seed: opts.seed ?? 0,
      rank_order: "asc",
      ...(opts.idempotencyKey ? { idempotency_key: opts.idempotencyKey } : {}),
    };
    return this.request<JobOut>("/api/generate", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  submitRetarget(
    layout: LayoutDoc,
    target: CanvasSpec,
    seed = 0,
    idempotencyKey?: string,
  ): Promise<JobOut> {
    return this.request<JobOut>("/api/retarget", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        layout,
        target_canvas: target,
        seed,
        ...(idempotencyKey ? { idempotency_key: idempotencyKey } : {}),
      }),
    });
  }

  getJob(id: string): Promise<JobOut> {
    return this.request<JobOut>(`/api/jobs/${id}`);
  }

  getCandidateSet(jobId: string): Promise<CandidateSetDoc> {
    return this.request<CandidateSetDoc>(`/api/results/${jobId}/layouts`);
  }

  getRetargetResult(jobId: string): Promise<RetargetResultDoc> {
    return this.request<RetargetResultDoc>(`/api/results/${jobId}/layouts`);
  }

  async getSvg(jobId: string, index: number | "source"): Promise<string> {
    const res = await this.fetchImpl(
      `${this.base}/api/results/${jobId}/svg/${index}`,
    );
    if (!res.ok) throw new ApiError(res.statusText, res.status);
    return res.text();
  }

  svgUrl(jobId: string, index: number | "source"): string {
    return `${this.base}/api/results/${jobId}/svg/${index}`;
  }

  health(): Promise<HealthDoc> {
    return this.request<HealthDoc>("/api/health");
  }

  /** Poll a job until done/failed. Interval starts at 500 ms and backs off. */
  async pollJob(id: string, opts: PollOptions = {}): Promise<JobOut> {
    const sleep = opts.sleep ?? defaultSleep;
    const timeout = opts.timeoutMs ?? 120_000;
    let interval = opts.intervalMs ?? 500;
    const max = opts.maxIntervalMs ?? 4000;
    const started = Date.now();
    for (;;) {
      const job = await this.getJob(id);
      if (job.status === "done" || job.status === "failed") return job;
      if (Date.now() - started > timeout) {
        throw new ApiError(`job ${id} still ${job.status} after ${timeout} ms`, 408);
      }
      await sleep(interval);
      interval = Math.min(interval * 2, max);
    }
  }
}
