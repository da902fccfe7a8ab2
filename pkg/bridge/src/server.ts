// Protocol server: one reader and one writer per connection, with an
// internal batching queue. Requests accumulate until the batch size is
// reached (or the input goes idle), the model scores the whole batch, and
// the responses for a batch are written most-recent-first, so pipelined
// clients see out-of-order delivery and must match on req_id.

import * as net from "node:net";
import * as readline from "node:readline";
import type { Readable, Writable } from "node:stream";
import { encodeLine, parseRequestLine, type ScoreRequest } from "./protocol.js";
import type { ScoringModel } from "./models.js";

export interface ServeOptions {
  model: ScoringModel;
  batchSize: number;
  flushDelayMs?: number;
}

export class ConnectionHandler {
  private pending: ScoreRequest[] = [];
  private timer: NodeJS.Timeout | null = null;
  private chain: Promise<void> = Promise.resolve();

  constructor(
    private opts: ServeOptions,
    private output: Writable,
  ) {}

  start(input: Readable): Promise<void> {
    this.write(encodeLine({ ready: true, name: this.opts.model.name }));
    const rl = readline.createInterface({ input, crlfDelay: Infinity });
    return new Promise((resolve) => {
      let finished = false;
      const finish = () => {
        if (finished) return;
        finished = true;
        this.scheduleFlush(true);
        this.chain.then(resolve);
      };
      rl.on("line", (line) => this.onLine(line));
      rl.on("close", finish);
      // Abrupt disconnects (ECONNRESET) surface as error events on the
      // interface; treat them as end-of-input rather than crashing.
      rl.on("error", finish);
      input.on("error", finish);
    });
  }

  private write(line: string): void {
    try {
      this.output.write(line);
    } catch {
      // peer gone mid-write; responses for a dead connection are moot
    }
  }

  private onLine(line: string): void {
    if (!line.trim()) return;
    const parsed = parseRequestLine(line);
    if (!parsed.ok) {
      // Stay alive: answer with the req_id when one was recoverable,
      // otherwise emit a bare protocol-error line.
      if (parsed.reqId !== null) {
        this.write(encodeLine({ req_id: parsed.reqId, error: parsed.error }));
      } else {
        this.write(encodeLine({ error: parsed.error }));
      }
      return;
    }
    this.pending.push(parsed.req);
    if (this.pending.length >= this.opts.batchSize) {
      this.scheduleFlush(true);
    } else {
      this.scheduleFlush(false);
    }
  }

  private scheduleFlush(immediate: boolean): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    if (immediate) {
      this.enqueueFlush();
    } else if (this.pending.length > 0) {
      this.timer = setTimeout(() => this.enqueueFlush(), this.opts.flushDelayMs ?? 3);
    }
  }

  private enqueueFlush(): void {
    const batch = this.pending.splice(0);
    if (batch.length === 0) return;
    this.chain = this.chain.then(() => this.scoreAndEmit(batch));
  }

  private async scoreAndEmit(batch: ScoreRequest[]): Promise<void> {
    let scores: number[] | null = null;
    let batchError: string | null = null;
    try {
      scores = await this.opts.model.scoreBatch(batch);
      if (scores.length !== batch.length) {
        batchError = "model returned a mismatched batch";
        scores = null;
      }
    } catch (err) {
      batchError = err instanceof Error ? err.message : String(err);
    }
    // Most-recent-first emission: deliberately out of arrival order.
    for (let i = batch.length - 1; i >= 0; i--) {
      if (scores !== null && Number.isFinite(scores[i])) {
        this.write(encodeLine({ req_id: batch[i].req_id, score: scores[i] }));
      } else {
        this.write(
          encodeLine({ req_id: batch[i].req_id, error: batchError ?? "non-finite score" }),
        );
      }
    }
  }
}

export async function serveStdio(opts: ServeOptions): Promise<void> {
  const handler = new ConnectionHandler(opts, process.stdout);
  await handler.start(process.stdin);
}

export function serveTcp(opts: ServeOptions, port: number): net.Server {
  const server = net.createServer((socket) => {
    const handler = new ConnectionHandler(opts, socket);
    handler.start(socket).then(() => socket.end());
    socket.on("error", () => socket.destroy());
  });
  server.listen(port);
  return server;
}
