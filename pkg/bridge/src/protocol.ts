// Newline-delimited JSON scoring protocol.
//
// Server emits {"ready": true, "name": str} once, then answers each
// {"req_id": int, "source": str, "text": str, "meta"?: {...}} with
// {"req_id": int, "score": number} or {"req_id": int, "error": str}.
// Responses may be emitted in any order; req_id pairs them up.

export interface ScoreRequest {
  req_id: number;
  source: string;
  text: string;
  meta?: Record<string, number>;
}

export type ScoreResponse =
  | { req_id: number; score: number }
  | { req_id: number; error: string };

export type ParsedLine =
  | { ok: true; req: ScoreRequest }
  | { ok: false; reqId: number | null; error: string };

export function parseRequestLine(line: string): ParsedLine {
  let obj: unknown;
  try {
    obj = JSON.parse(line);
  } catch {
    return { ok: false, reqId: null, error: "invalid JSON" };
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    return { ok: false, reqId: null, error: "request must be a JSON object" };
  }
  const rec = obj as Record<string, unknown>;
  const reqId =
    typeof rec.req_id === "number" && Number.isInteger(rec.req_id)
      ? rec.req_id
      : null;
  if (reqId === null) {
    return { ok: false, reqId: null, error: "missing integer req_id" };
  }
  if (typeof rec.source !== "string") {
    return { ok: false, reqId, error: "missing string field 'source'" };
  }
  if (typeof rec.text !== "string") {
    return { ok: false, reqId, error: "missing string field 'text'" };
  }
  let meta: Record<string, number> | undefined;
  if (rec.meta !== undefined) {
    if (typeof rec.meta !== "object" || rec.meta === null) {
      return { ok: false, reqId, error: "meta must be an object" };
    }
    meta = {};
    for (const [k, v] of Object.entries(rec.meta as Record<string, unknown>)) {
      if (typeof v === "number") meta[k] = v;
    }
  }
  return { ok: true, req: { req_id: reqId, source: rec.source, text: rec.text, meta } };
}

export function encodeLine(obj: unknown): string {
  return JSON.stringify(obj) + "\n";
}
