import type { SearchResponse } from "./types.js";

/**
 * Thin client for the search service. At most one request is in flight:
 * submitting a new query aborts the previous one.
 */
export class SearchClient {
  private baseUrl: string;
  private controller: AbortController | null = null;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  async search(query: string, k: number, threshold: number): Promise<SearchResponse> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const resp = await fetch(`${this.baseUrl}/search`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query, k, threshold }),
      signal: controller.signal,
    });
    if (!resp.ok) {
      let message = `search failed (HTTP ${resp.status})`;
      try {
        const body = await resp.json();
        if (body?.error?.message) {
          message = `${body.error.code}: ${body.error.message}`;
        }
      } catch {
        // non-JSON error body; keep the HTTP status message
      }
      throw new Error(message);
    }
    return (await resp.json()) as SearchResponse;
  }
}
