import { createHash } from "node:crypto";

export type Pooling = "first_token" | "mean";

export interface Encoder {
  dim: number | null; // null until the first batch fixes it (transformer path)
  encode(texts: string[]): Promise<Float32Array[]>;
}

/**
 * Deterministic bag-of-ngrams encoder, selected with a model id of the form
 * "hash:<dim>".  Whitespace tokens and their bigrams are hashed into signed
 * buckets and the count vector is L2-normalized; empty text yields zeros.
 * Exists so extraction pipelines can run (and be tested bit-for-bit) without
 * a downloaded transformer.
 */
export function hashEncoder(dim: number): Encoder {
  if (!Number.isInteger(dim) || dim < 1) {
    throw new Error(`hash encoder dimension must be a positive integer, got ${dim}`);
  }
  const encodeOne = (text: string): Float32Array => {
    const acc = new Float64Array(dim);
    const tokens = text.toLowerCase().split(/\s+/).filter((t) => t.length > 0);
    const grams = tokens.concat(tokens.slice(0, -1).map((t, i) => `${t} ${tokens[i + 1]}`));
    for (const gram of grams) {
      const digest = createHash("sha256").update(gram, "utf-8").digest();
      const h = digest.readBigUInt64LE(0);
      const sign = (h & 1n) === 1n ? 1.0 : -1.0;
      const bucket = Number((h >> 1n) % BigInt(dim));
      acc[bucket] += sign;
    }
    let norm = 0;
    for (const v of acc) norm += v * v;
    norm = Math.sqrt(norm);
    const out = new Float32Array(dim);
    for (let i = 0; i < dim; i++) {
      out[i] = norm > 0 ? acc[i] / norm : 0;
    }
    return out;
  };
  return {
    dim,
    async encode(texts) {
      return texts.map(encodeOne);
    },
  };
}

/**
 * Pretrained transformer sentence encoder via transformers.js.  The model is
 * fetched from the local cache or the model hub; a missing runtime or model
 * surfaces as a clear fetch error.  `first_token` pooling takes the leading
 * classification token's embedding, `mean` averages over tokens.
 */
export async function transformerEncoder(model: string, pooling: Pooling,
                                         revision: string): Promise<Encoder> {
  let pipeline: any;
  try {
    ({ pipeline } = await import("@xenova/transformers" as string));
  } catch (err) {
    throw new Error(
      `transformer runtime unavailable (install @xenova/transformers to encode with "${model}"): ${err}`);
  }
  let extractor: any;
  try {
    extractor = await pipeline("feature-extraction", model, { revision });
  } catch (err) {
    throw new Error(`failed to fetch model "${model}" (revision ${revision}): ${err}`);
  }
  const self: Encoder = {
    dim: null,
    async encode(texts) {
      const out: Float32Array[] = [];
      for (const text of texts) {
        const result = await extractor(text, {
          pooling: pooling === "mean" ? "mean" : "cls",
          normalize: false,
        });
        const vector = Float32Array.from(result.data as Iterable<number>);
        if (self.dim === null) {
          self.dim = vector.length;
        } else if (vector.length !== self.dim) {
          throw new Error(`model produced dimension ${vector.length}, expected ${self.dim}`);
        }
        out.push(vector);
      }
      return out;
    },
  };
  return self;
}

export async function createEncoder(model: string, pooling: Pooling,
                                    revision: string): Promise<Encoder> {
  const hashed = /^hash:(\d+)$/.exec(model);
  if (hashed) {
    return hashEncoder(Number(hashed[1]));
  }
  return transformerEncoder(model, pooling, revision);
}
