/**
 * Minimal client for the infilling service JSON API.
 *
 * At most one infill request is in flight; starting a new one aborts the
 * previous request.
 */

import type { DecodeSettings } from "./state.js";

export interface FillResponse {
  completed_text: string;
  fills: { index: number; granularity: string; text: string }[];
  diagnostics: {
    answers_emitted: number;
    truncated: boolean;
    stripped_specials: number;
  };
}

export interface HealthResponse {
  status: string;
  checkpoint_fingerprint?: string;
  vocab_fingerprint?: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class InfillClient {
  private inFlight: AbortController | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  async health(): Promise<HealthResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/v1/health`);
    const body = (await resp.json()) as HealthResponse;
    if (!resp.ok) throw new ApiError(resp.status, body.status ?? "unavailable");
    return body;
  }

  /** POST /v1/infill, aborting any request still in flight. */
  async infill(
    text: string,
    decode: DecodeSettings,
    seed: number,
  ): Promise<FillResponse> {
    this.inFlight?.abort();
    const controller = new AbortController();
    this.inFlight = controller;
    try {
      const resp = await this.fetchFn(`${this.baseUrl}/v1/infill`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ text, decode, seed }),
        signal: controller.signal,
      });
      const body = (await resp.json()) as FillResponse & { error?: string };
      if (!resp.ok) {
        throw new ApiError(resp.status, body.error ?? `HTTP ${resp.status}`);
      }
      return body;
    } finally {
      if (this.inFlight === controller) this.inFlight = null;
    }
  }

  cancel(): void {
    this.inFlight?.abort();
    this.inFlight = null;
  }
}
