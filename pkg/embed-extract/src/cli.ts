#!/usr/bin/env node
import { parseArgs } from "node:util";

import { DEFAULT_MODEL, extract } from "./extract.js";
import { Pooling } from "./encoders.js";

const HELP = `embed-extract: encode keyed texts into a binary embedding store

usage: embed-extract --input records.jsonl --output vectors.cvle [options]

options:
  --input PATH        line-delimited JSON with key (or tweet_id/mist_id) + text
  --output PATH       store file to write (a .meta.json sidecar is added)
  --model ID          encoder: a model-hub id, or hash:<dim> for the built-in
                      deterministic hash encoder (default: ${DEFAULT_MODEL})
  --pooling MODE      first_token | mean (default: first_token)
  --revision REV      model revision to pin (default: main)
  --batch-size N      texts encoded per batch (default: 16)
`;

async function main(): Promise<number> {
  const { values } = parseArgs({
    options: {
      input: { type: "string" },
      output: { type: "string" },
      model: { type: "string", default: DEFAULT_MODEL },
      pooling: { type: "string", default: "first_token" },
      revision: { type: "string", default: "main" },
      "batch-size": { type: "string", default: "16" },
      help: { type: "boolean", default: false },
    },
  });
  if (values.help || !values.input || !values.output) {
    process.stdout.write(HELP);
    return values.help ? 0 : 2;
  }
  if (values.pooling !== "first_token" && values.pooling !== "mean") {
    console.error(`error: unknown pooling "${values.pooling}"`);
    return 2;
  }
  try {
    const result = await extract({
      input: values.input,
      output: values.output,
      model: values.model,
      pooling: values.pooling as Pooling,
      revision: values.revision,
      batchSize: Number(values["batch-size"]),
    });
    console.log(`wrote ${result.count} records (dim ${result.dim}) to ${result.output}`);
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

main().then((code) => process.exit(code));
