import type { SpanInfo, TokenInfo } from "./types.js";

/**
 * Client-side re-segmentation, identical to the server rule: tokens with
 * p >= threshold form a mask and maximal runs of adjacent masked tokens merge
 * into one span. Char offsets come from the first/last token; the span score
 * is the max probability inside it.
 */
export function computeSpans(tokens: TokenInfo[], threshold: number): SpanInfo[] {
  if (!(threshold > 0 && threshold < 1)) {
    throw new RangeError(`threshold must be in (0, 1), got ${threshold}`);
  }
  const spans: SpanInfo[] = [];
  let runStart = -1;
  for (let i = 0; i <= tokens.length; i++) {
    const masked = i < tokens.length && tokens[i].p >= threshold;
    if (masked && runStart === -1) {
      runStart = i;
    } else if (!masked && runStart !== -1) {
      spans.push(makeSpan(tokens, runStart, i - 1));
      runStart = -1;
    }
  }
  return spans;
}

function makeSpan(tokens: TokenInfo[], ts: number, te: number): SpanInfo {
  let score = tokens[ts].p;
  for (let i = ts + 1; i <= te; i++) {
    score = Math.max(score, tokens[i].p);
  }
  return { ts, te, cb: tokens[ts].b, ce: tokens[te].e, score };
}

/** Heatmap opacity: proportional to p with a minimum visible floor. */
export const OPACITY_FLOOR = 0.05;

export function opacityFor(p: number): number {
  return Math.max(OPACITY_FLOOR, Math.min(1, p));
}
