import { computeSpans, opacityFor } from "./spans.js";
import type { Hit } from "./types.js";

/**
 * Render the hit list. Pure in (hits, threshold): the container is rebuilt
 * from scratch, so identical inputs produce an identical DOM. Spans are
 * recomputed client-side from the per-token probabilities, which is what the
 * threshold slider relies on.
 */
export function renderHits(container: HTMLElement, hits: Hit[], threshold: number): void {
  container.innerHTML = "";
  if (hits.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty";
    empty.textContent = "No results.";
    container.appendChild(empty);
    return;
  }
  for (const hit of hits) {
    container.appendChild(hitCard(hit, threshold));
  }
}

function hitCard(hit: Hit, threshold: number): HTMLElement {
  const card = document.createElement("article");
  card.className = "hit";
  card.dataset.id = hit.id;

  const header = document.createElement("header");
  const idEl = document.createElement("span");
  idEl.className = "hit-id";
  idEl.textContent = hit.id;
  const scoreEl = document.createElement("span");
  scoreEl.className = "hit-score";
  scoreEl.textContent = `score ${hit.score.toFixed(4)}`;
  header.append(idEl, scoreEl);
  card.appendChild(header);

  const spans = computeSpans(hit.tokens, threshold);
  const inSpan = new Set<number>();
  for (const s of spans) {
    for (let i = s.ts; i <= s.te; i++) inSpan.add(i);
  }

  const body = document.createElement("p");
  body.className = "hit-text";
  let cursor = 0;
  hit.tokens.forEach((tok, i) => {
    if (tok.b > cursor) {
      body.appendChild(document.createTextNode(hit.text.slice(cursor, tok.b)));
    }
    const el = document.createElement("span");
    el.className = inSpan.has(i) ? "tok evidence" : "tok";
    el.textContent = tok.s;
    el.title = `p=${tok.p.toFixed(3)}`;
    el.style.backgroundColor = `rgba(255, 153, 0, ${opacityFor(tok.p).toFixed(3)})`;
    body.appendChild(el);
    cursor = tok.e;
  });
  if (cursor < hit.text.length) {
    body.appendChild(document.createTextNode(hit.text.slice(cursor)));
  }
  card.appendChild(body);

  const footer = document.createElement("footer");
  footer.className = "hit-spans";
  footer.textContent = spans.length
    ? spans.map((s) => `"${hit.text.slice(s.cb, s.ce)}" (${s.score.toFixed(2)})`).join("  ")
    : "no evidence above threshold";
  card.appendChild(footer);
  return card;
}
