// Readers and writers for the engine's file contracts: prompt JSONL,
// vocabulary files (4 reserved-id header lines, then one token per line,
// body line index = id), and pre-tokenized catalog JSONL.

import * as fs from "node:fs";

export interface PromptRecord {
  query_id: number;
  direction: "predict-tail" | "predict-head";
  triple: [number, number, number];
  token_ids: number[];
  mask_start: number;
}

export function readPrompts(path: string): PromptRecord[] {
  return fs
    .readFileSync(path, "utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as PromptRecord);
}

export interface Vocab {
  tokens: string[];
  bosId: number;
  eosId: number;
  maskId: number;
  padId: number;
}

export function vocabSize(v: Vocab): number {
  return v.tokens.length;
}

export function readVocab(path: string): Vocab {
  const lines = fs.readFileSync(path, "utf-8").split("\n");
  if (lines[lines.length - 1] === "") lines.pop();
  if (lines.length < 5) throw new Error(`${path}: vocabulary too short`);
  const [bosId, eosId, maskId, padId] = lines.slice(0, 4).map((x) => {
    const n = Number(x);
    if (!Number.isInteger(n)) throw new Error(`${path}: bad reserved id ${x}`);
    return n;
  });
  return { tokens: lines.slice(4), bosId, eosId, maskId, padId };
}

export function writeVocab(path: string, v: Vocab): void {
  const header = [v.bosId, v.eosId, v.maskId, v.padId].join("\n");
  fs.writeFileSync(path, header + "\n" + v.tokens.join("\n") + "\n");
}

export function readCatalog(path: string): number[][] {
  const rows = new Map<number, number[]>();
  for (const line of fs.readFileSync(path, "utf-8").split("\n")) {
    if (!line.trim()) continue;
    const rec = JSON.parse(line) as { entity_id: number; token_ids: number[] };
    rows.set(rec.entity_id, rec.token_ids);
  }
  const out: number[][] = [];
  for (let i = 0; i < rows.size; i++) {
    const row = rows.get(i);
    if (!row) throw new Error(`${path}: missing entity id ${i}`);
    out.push(row);
  }
  return out;
}

export function writeCatalog(path: string, rows: number[][]): void {
  const lines = rows.map((tokenIds, i) =>
    JSON.stringify({ entity_id: i, token_ids: tokenIds }),
  );
  fs.writeFileSync(path, lines.join("\n") + "\n");
}

export interface ManifestQuery {
  triple: [number, number, number];
  direction: string;
}

export function writeTableManifest(
  path: string,
  prompts: PromptRecord[],
  vocabSizeValue: number,
  lMax: number,
): void {
  const queries: Record<string, ManifestQuery> = {};
  for (const p of prompts) {
    queries[String(p.query_id)] = { triple: p.triple, direction: p.direction };
  }
  const manifest = { l_max: lMax, queries, vocab_size: vocabSizeValue };
  fs.writeFileSync(path, JSON.stringify(manifest, null, 2) + "\n");
}
