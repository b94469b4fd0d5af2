// MLMT logit-table files, the binary boundary consumed by the ranking engine.
// Little-endian: magic "MLMT", u32 version=1, u32 vocab_size, u32 l_max, then
// per record a u64 query id followed by l_max*vocab_size float32, row-major.

import * as fs from "node:fs";

export const MLMT_VERSION = 1;
const MAGIC = Buffer.from("MLMT", "ascii");
const HEADER_BYTES = 16;

export interface LogitTable {
  queryId: number;
  values: Float32Array; // length lMax * vocabSize, row-major by position
}

export class MlmtWriter {
  private fd: number;
  private readonly recordFloats: number;
  count = 0;

  constructor(
    path: string,
    readonly vocabSize: number,
    readonly lMax: number,
  ) {
    this.recordFloats = vocabSize * lMax;
    this.fd = fs.openSync(path, "w");
    const header = Buffer.alloc(HEADER_BYTES);
    MAGIC.copy(header, 0);
    header.writeUInt32LE(MLMT_VERSION, 4);
    header.writeUInt32LE(vocabSize, 8);
    header.writeUInt32LE(lMax, 12);
    fs.writeSync(this.fd, header);
  }

  add(table: LogitTable): void {
    if (table.values.length !== this.recordFloats) {
      throw new Error(
        `table for query ${table.queryId} has ${table.values.length} values, ` +
          `expected ${this.recordFloats}`,
      );
    }
    const buf = Buffer.alloc(8 + 4 * this.recordFloats);
    buf.writeBigUInt64LE(BigInt(table.queryId), 0);
    for (let i = 0; i < table.values.length; i++) {
      buf.writeFloatLE(table.values[i], 8 + 4 * i);
    }
    fs.writeSync(this.fd, buf);
    this.count += 1;
  }

  close(): void {
    fs.closeSync(this.fd);
  }
}

export function writeMlmt(
  path: string,
  tables: Iterable<LogitTable>,
  vocabSize: number,
  lMax: number,
): number {
  const writer = new MlmtWriter(path, vocabSize, lMax);
  try {
    for (const t of tables) writer.add(t);
  } finally {
    writer.close();
  }
  return writer.count;
}

export function readMlmt(path: string): {
  vocabSize: number;
  lMax: number;
  tables: LogitTable[];
} {
  const raw = fs.readFileSync(path);
  if (raw.length < HEADER_BYTES) throw new Error(`${path}: truncated header`);
  if (!raw.subarray(0, 4).equals(MAGIC)) throw new Error(`${path}: bad magic`);
  const version = raw.readUInt32LE(4);
  if (version !== MLMT_VERSION) throw new Error(`${path}: version ${version}`);
  const vocabSize = raw.readUInt32LE(8);
  const lMax = raw.readUInt32LE(12);
  const recordBytes = 8 + 4 * vocabSize * lMax;
  const tables: LogitTable[] = [];
  for (let offset = HEADER_BYTES; offset < raw.length; offset += recordBytes) {
    if (offset + recordBytes > raw.length) {
      throw new Error(`${path}: truncated record at byte ${offset}`);
    }
    const queryId = Number(raw.readBigUInt64LE(offset));
    const values = new Float32Array(vocabSize * lMax);
    for (let i = 0; i < values.length; i++) {
      values[i] = raw.readFloatLE(offset + 8 + 4 * i);
    }
    tables.push({ queryId, values });
  }
  return { vocabSize, lMax, tables };
}
