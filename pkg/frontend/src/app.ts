import { SearchClient } from "./api.js";
import { renderHits } from "./render.js";
import type { Hit } from "./types.js";

interface AppElements {
  form: HTMLFormElement;
  input: HTMLInputElement;
  submit: HTMLButtonElement;
  slider: HTMLInputElement;
  sliderLabel: HTMLElement;
  results: HTMLElement;
  status: HTMLElement;
  banner: HTMLElement;
}

/**
 * Wire the page: submit runs a query against the service; the slider
 * re-segments evidence spans locally from the probabilities already in hand,
 * with no network round-trip.
 */
export function initApp(els: AppElements, client: SearchClient, k = 10): void {
  let hits: Hit[] = [];

  const threshold = () => Number(els.slider.value);

  const syncSubmit = () => {
    els.submit.disabled = els.input.value.trim().length === 0;
  };
  syncSubmit();
  els.input.addEventListener("input", syncSubmit);

  els.slider.addEventListener("input", () => {
    els.sliderLabel.textContent = threshold().toFixed(2);
    renderHits(els.results, hits, threshold());
  });
  els.sliderLabel.textContent = threshold().toFixed(2);

  els.form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const query = els.input.value.trim();
    if (!query) return;
    els.banner.hidden = true;
    els.status.textContent = "searching…";
    try {
      const resp = await client.search(query, k, threshold());
      hits = resp.hits;
      renderHits(els.results, hits, threshold());
      els.status.textContent = `${resp.hits.length} hits in ${resp.latency_ms.toFixed(1)} ms`;
    } catch (err) {
      if (err instanceof DOMException && err.name === "AbortError") {
        return; // superseded by a newer query
      }
      els.banner.textContent = err instanceof Error ? err.message : String(err);
      els.banner.hidden = false;
      els.status.textContent = "";
      // the input keeps its value so the user can retry or edit
    }
  });
}

export function collectElements(root: Document | HTMLElement): AppElements {
  const get = <T extends HTMLElement>(sel: string): T => {
    const el = root.querySelector<T>(sel);
    if (!el) throw new Error(`missing element ${sel}`);
    return el;
  };
  return {
    form: get<HTMLFormElement>("#search-form"),
    input: get<HTMLInputElement>("#query"),
    submit: get<HTMLButtonElement>("#submit"),
    slider: get<HTMLInputElement>("#threshold"),
    sliderLabel: get<HTMLElement>("#threshold-value"),
    results: get<HTMLElement>("#results"),
    status: get<HTMLElement>("#status"),
    banner: get<HTMLElement>("#error-banner"),
  };
}
