import { promises as fs } from "node:fs";
import path from "node:path";

import { createEncoder, Pooling } from "./encoders.js";
import { encodeStore, StoreRecord } from "./format.js";

// hub id of the 1024-dim COVID-domain Twitter sentence encoder
export const DEFAULT_MODEL = "digitalepidemiologylab/covid-twitter-bert-v2";

export interface ExtractionJob {
  input: string;
  output: string;
  model?: string;
  pooling?: Pooling;
  revision?: string;
  batchSize?: number;
}

export interface ExtractionResult {
  count: number;
  dim: number;
  output: string;
}

interface InputRecord {
  key: string;
  text: string;
}

export function parseInputLine(line: string, lineno: number): InputRecord {
  let raw: any;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new Error(`line ${lineno}: not valid JSON`);
  }
  const key = raw.key ?? raw.tweet_id ?? raw.mist_id;
  if (typeof key !== "string" || key.length === 0) {
    throw new Error(`line ${lineno}: missing key (expected one of key/tweet_id/mist_id)`);
  }
  const text = raw.text;
  if (typeof text !== "string") {
    throw new Error(`line ${lineno}: missing text field`);
  }
  return { key, text };
}

export async function readInput(inputPath: string): Promise<InputRecord[]> {
  const body = await fs.readFile(inputPath, "utf-8");
  const records: InputRecord[] = [];
  const seen = new Set<string>();
  body.split("\n").forEach((line, idx) => {
    if (line.trim().length === 0) return;
    const record = parseInputLine(line, idx + 1);
    if (seen.has(record.key)) {
      throw new Error(`line ${idx + 1}: duplicate key "${record.key}"`);
    }
    seen.add(record.key);
    records.push(record);
  });
  return records;
}

async function atomicWrite(target: string, payload: Buffer | string) {
  const tmp = path.join(path.dirname(path.resolve(target)),
                        `.tmp-${path.basename(target)}-${process.pid}`);
  await fs.writeFile(tmp, payload);
  await fs.rename(tmp, target);
}

/** Encode every input record and write the binary store plus a metadata sidecar. */
export async function extract(job: ExtractionJob): Promise<ExtractionResult> {
  const model = job.model ?? DEFAULT_MODEL;
  const pooling = job.pooling ?? "first_token";
  const revision = job.revision ?? "main";
  const batchSize = job.batchSize ?? 16;
  if (batchSize < 1) {
    throw new Error(`batch size must be positive, got ${batchSize}`);
  }

  const records = await readInput(job.input);
  const encoder = await createEncoder(model, pooling, revision);

  const out: StoreRecord[] = [];
  for (let start = 0; start < records.length; start += batchSize) {
    const batch = records.slice(start, start + batchSize);
    const vectors = await encoder.encode(batch.map((r) => r.text));
    batch.forEach((r, i) => out.push({ key: r.key, vector: vectors[i] }));
  }

  const dim = encoder.dim ?? 0; // no records and no fixed model dimension
  await atomicWrite(job.output, encodeStore(dim, out));
  const meta = {
    model, revision, pooling, dim,
    count: out.length,
    input: path.basename(job.input),
  };
  await atomicWrite(`${job.output}.meta.json`, JSON.stringify(meta, null, 2) + "\n");
  return { count: out.length, dim, output: job.output };
}
