export interface TokenInfo {
  s: string; // surface
  b: number; // char start
  e: number; // char end (half-open)
  p: number; // relevance probability
}

export interface SpanInfo {
  ts: number; // first token index (inclusive)
  te: number; // last token index (inclusive)
  cb: number; // char start
  ce: number; // char end (half-open)
  score: number; // max probability within the span
}

export interface Hit {
  id: string;
  score: number;
  text: string;
  tokens: TokenInfo[];
  spans: SpanInfo[];
}

export interface SearchResponse {
  hits: Hit[];
  latency_ms: number;
}

export interface ApiError {
  error: { code: string; message: string };
}
