// Dataset exporter: joins a sources file with a candidates file, attaches
// stub embeddings/logprobs and model scores, and writes the reranker's
// JSONL dataset format.
//
// Inputs (both UTF-8 JSONL):
//   sources:    {"id": str, "source": str}
//   candidates: {"id": str, "candidates": [str, ...]}
// Output: one header line {"meta": {"embedding_dim": D, "normalized": true}}
// followed by one instance per source id, candidates in file order.
//
// The embedding provider is a deterministic hash stub (unit-norm gaussian
// vectors keyed by the candidate text, rounded to 32-bit floats); swap in a
// real provider by replacing embedFor.

import { promises as fs } from "node:fs";
import * as path from "node:path";
import { hashGauss, hashUnit, type ScoringModel } from "./models.js";

export interface ExportOptions {
  sourcesPath: string;
  candidatesPath: string;
  outPath: string;
  model: ScoringModel;
  dim: number;
}

export function embedFor(text: string, dim: number): number[] {
  const raw = new Array<number>(dim);
  for (let i = 0; i < dim; i++) {
    raw[i] = hashGauss("emb", String(i), text);
  }
  const norm = Math.sqrt(raw.reduce((acc, v) => acc + v * v, 0)) || 1;
  return raw.map((v) => Math.fround(v / norm));
}

export function logprobsFor(text: string): { sum: number; avg: number } {
  const avg = -(0.2 + 3.0 * hashUnit("lp", text));
  const words = Math.max(1, text.split(/\s+/).length);
  return { sum: avg * words, avg };
}

async function readJsonl(filePath: string): Promise<Record<string, unknown>[]> {
  const text = await fs.readFile(filePath, "utf-8");
  const out: Record<string, unknown>[] = [];
  let lineNo = 0;
  for (const line of text.split("\n")) {
    lineNo++;
    if (!line.trim()) continue;
    let obj: unknown;
    try {
      obj = JSON.parse(line);
    } catch (err) {
      throw new Error(`${filePath}:${lineNo}: invalid JSON`);
    }
    if (typeof obj !== "object" || obj === null) {
      throw new Error(`${filePath}:${lineNo}: expected an object`);
    }
    out.push(obj as Record<string, unknown>);
  }
  return out;
}

export async function exportDataset(opts: ExportOptions): Promise<number> {
  const sources = await readJsonl(opts.sourcesPath);
  const candidateRows = await readJsonl(opts.candidatesPath);
  const candidatesById = new Map<string, string[]>();
  for (const row of candidateRows) {
    const id = String(row.id);
    const cands = row.candidates;
    if (!Array.isArray(cands) || cands.some((c) => typeof c !== "string")) {
      throw new Error(`candidates for id ${JSON.stringify(id)} must be a string array`);
    }
    candidatesById.set(id, cands as string[]);
  }

  const lines: string[] = [
    JSON.stringify({ meta: { embedding_dim: opts.dim, normalized: true } }),
  ];
  for (const row of sources) {
    const id = String(row.id);
    const source = String(row.source ?? "");
    const texts = candidatesById.get(id);
    if (texts === undefined) {
      throw new Error(`no candidates for source id ${JSON.stringify(id)}`);
    }
    if (texts.length === 0) {
      throw new Error(`empty candidate list for source id ${JSON.stringify(id)}`);
    }
    const scores = await opts.model.scoreBatch(
      texts.map((text, i) => ({ req_id: i, source, text })),
    );
    const candidates = texts.map((text, i) => {
      const lp = logprobsFor(text);
      return {
        text,
        embedding: embedFor(text, opts.dim),
        logprob_sum: lp.sum,
        logprob_avg: lp.avg,
        scores: { [opts.model.name]: scores[i] },
      };
    });
    lines.push(JSON.stringify({ id, source, candidates }));
  }

  // Partial-write protection: stage to a temp file, then rename.
  const tmpPath = path.join(
    path.dirname(opts.outPath),
    `.${path.basename(opts.outPath)}.tmp`,
  );
  await fs.writeFile(tmpPath, lines.join("\n") + "\n", "utf-8");
  await fs.rename(tmpPath, opts.outPath);
  return sources.length;
}
