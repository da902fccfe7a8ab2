#!/usr/bin/env node
// bayesrank-bridge: serve a scoring model over the newline-JSON protocol,
// or export a scored dataset in the reranker's format.
//
//   bayesrank-bridge serve (--stdio | --port N) [--batch-size K] [--model SPEC]
//   bayesrank-bridge export --sources F --candidates F --out F [--model SPEC] [--dim N]
//
// Model specs: stub:echo-logprob | stub:textlen | stub:hash | stub:fail-on:<needle>

import { loadModel } from "./models.js";
import { serveStdio, serveTcp } from "./server.js";
import { exportDataset } from "./exporter.js";

interface Flags {
  positional: string[];
  options: Map<string, string | boolean>;
}

function parseArgs(argv: string[]): Flags {
  const positional: string[] = [];
  const options = new Map<string, string | boolean>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg.startsWith("--")) {
      const key = arg.slice(2);
      const next = argv[i + 1];
      if (next !== undefined && !next.startsWith("--")) {
        options.set(key, next);
        i++;
      } else {
        options.set(key, true);
      }
    } else {
      positional.push(arg);
    }
  }
  return { positional, options };
}

function usage(): never {
  process.stderr.write(
    "usage: bayesrank-bridge serve (--stdio | --port N) [--batch-size K] [--model SPEC]\n" +
      "       bayesrank-bridge export --sources F --candidates F --out F [--model SPEC] [--dim N]\n",
  );
  process.exit(2);
}

async function main(): Promise<number> {
  const { positional, options } = parseArgs(process.argv.slice(2));
  const command = positional[0];
  if (command === "serve") {
    const spec = String(options.get("model") ?? "stub:echo-logprob");
    let model;
    try {
      model = loadModel(spec);
    } catch (err) {
      // Contract: a failed startup still emits a handshake line.
      process.stdout.write(
        JSON.stringify({ ready: false, error: err instanceof Error ? err.message : String(err) }) + "\n",
      );
      return 1;
    }
    const batchSize = Number(options.get("batch-size") ?? 1);
    if (!Number.isInteger(batchSize) || batchSize < 1) usage();
    if (options.get("stdio")) {
      await serveStdio({ model, batchSize });
      return 0;
    }
    const port = Number(options.get("port"));
    if (!Number.isInteger(port) || port <= 0) usage();
    serveTcp({ model, batchSize }, port);
    return new Promise(() => {}); // runs until killed
  }
  if (command === "export") {
    const sources = options.get("sources");
    const candidates = options.get("candidates");
    const out = options.get("out");
    if (typeof sources !== "string" || typeof candidates !== "string" || typeof out !== "string") {
      usage();
    }
    const dim = Number(options.get("dim") ?? 16);
    if (!Number.isInteger(dim) || dim < 1) usage();
    const model = loadModel(String(options.get("model") ?? "stub:hash"));
    const count = await exportDataset({
      sourcesPath: sources,
      candidatesPath: candidates,
      outPath: out,
      model,
      dim,
    });
    process.stderr.write(`exported ${count} instances to ${out}\n`);
    return 0;
  }
  usage();
}

main().then(
  (code) => {
    if (code !== 0) process.exitCode = code;
  },
  (err) => {
    process.stderr.write(`error: ${err instanceof Error ? err.message : String(err)}\n`);
    process.exitCode = 1;
  },
);
