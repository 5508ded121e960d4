// Binary embedding-store layout shared with the stance engine:
//   magic "CVLE" | u32 LE version | u64 LE record count | u32 LE dimension
//   per record:  u16 LE key length | UTF-8 key | dimension float32 LE values

export const STORE_MAGIC = "CVLE";
export const STORE_VERSION = 1;

export interface StoreRecord {
  key: string;
  vector: Float32Array;
}

export function encodeStore(dim: number, records: StoreRecord[]): Buffer {
  const chunks: Buffer[] = [];
  const header = Buffer.alloc(20);
  header.write(STORE_MAGIC, 0, "ascii");
  header.writeUInt32LE(STORE_VERSION, 4);
  header.writeBigUInt64LE(BigInt(records.length), 8);
  header.writeUInt32LE(dim, 16);
  chunks.push(header);

  for (const { key, vector } of records) {
    if (vector.length !== dim) {
      throw new Error(`vector for "${key}" has length ${vector.length}, store dimension is ${dim}`);
    }
    const keyBytes = Buffer.from(key, "utf-8");
    if (keyBytes.length > 0xffff) {
      throw new Error(`key too long: "${key.slice(0, 40)}..."`);
    }
    const lenBuf = Buffer.alloc(2);
    lenBuf.writeUInt16LE(keyBytes.length, 0);
    const values = Buffer.alloc(4 * dim);
    const view = new DataView(values.buffer, values.byteOffset, values.byteLength);
    for (let i = 0; i < dim; i++) {
      view.setFloat32(4 * i, vector[i], true);
    }
    chunks.push(lenBuf, keyBytes, values);
  }
  return Buffer.concat(chunks);
}

export function decodeStore(data: Buffer): { dim: number; records: StoreRecord[] } {
  if (data.subarray(0, 4).toString("ascii") !== STORE_MAGIC) {
    throw new Error("bad magic bytes, not an embedding store");
  }
  const version = data.readUInt32LE(4);
  if (version !== STORE_VERSION) {
    throw new Error(`unsupported store version ${version}`);
  }
  const count = Number(data.readBigUInt64LE(8));
  const dim = data.readUInt32LE(16);
  let offset = 20;
  const records: StoreRecord[] = [];
  for (let r = 0; r < count; r++) {
    const keyLen = data.readUInt16LE(offset);
    offset += 2;
    const key = data.subarray(offset, offset + keyLen).toString("utf-8");
    offset += keyLen;
    const vector = new Float32Array(dim);
    const view = new DataView(data.buffer, data.byteOffset + offset, 4 * dim);
    for (let i = 0; i < dim; i++) {
      vector[i] = view.getFloat32(4 * i, true);
    }
    offset += 4 * dim;
    records.push({ key, vector });
  }
  if (offset !== data.length) {
    throw new Error(`${data.length - offset} trailing bytes after declared ${count} records`);
  }
  return { dim, records };
}
