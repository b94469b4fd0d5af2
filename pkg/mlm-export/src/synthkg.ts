// Small synthetic knowledge graph plus the word-level vocabulary and
// pre-tokenized entity catalog the engine consumes in external mode.
//
// Valid and test triples are re-drawn from the training facts: with random
// links there is nothing to generalize to, and the end-to-end check is that
// the train/export/rank pipeline can drive memorized facts to the top.

import * as fs from "node:fs";
import * as path from "node:path";
import type { Vocab } from "./io.js";
import { writeCatalog, writeVocab } from "./io.js";

export interface TinyKgSpec {
  dir: string;
  nEntities?: number;
  nTriples?: number;
  nValid?: number;
  nTest?: number;
  vocabSize?: number;
  seed?: number;
}

export interface TinyKg {
  dir: string;
  vocabPath: string;
  catalogPath: string;
  nEntities: number;
  lMax: number;
  vocab: Vocab;
  triples: Array<[number, number, number]>;
  validIdx: number[];
  testIdx: number[];
}

export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const RELATIONS = ["_linked_to", "_paired_with"];
const GROUPS = ["alpha", "beta", "gamma", "delta"];

function entityName(i: number): string {
  return i % 5 === 0 ? `big item ${i}` : `item ${i}`;
}

function entityDefinition(i: number): string {
  return `member of group ${GROUPS[i % GROUPS.length]}`;
}

/** Word split matching the engine's greedy match over this vocabulary. */
export function wordTokens(text: string, vocab: Vocab): number[] {
  const ids = new Map(vocab.tokens.map((t, i) => [t, i]));
  return text.split(" ").map((w, i) => {
    const tok = i === 0 ? w : " " + w;
    const id = ids.get(tok);
    if (id === undefined) throw new Error(`word ${tok} missing from vocabulary`);
    return id;
  });
}

export function makeTinyKg(spec: TinyKgSpec): TinyKg {
  const nEntities = spec.nEntities ?? 50;
  const nTriples = spec.nTriples ?? 150;
  const nValid = spec.nValid ?? 30;
  const nTest = spec.nTest ?? 40;
  const vocabSize = spec.vocabSize ?? 1000;
  const rand = mulberry32(spec.seed ?? 42);

  fs.mkdirSync(spec.dir, { recursive: true });
  const names = Array.from({ length: nEntities }, (_, i) => entityName(i));
  const defs = Array.from({ length: nEntities }, (_, i) => entityDefinition(i));

  // vocabulary: markers, byte fallback, every word bare and space-prefixed,
  // then filler tokens up to the requested size
  const words = new Set<string>();
  for (const text of [...names, ...defs, "linked to", "paired with"]) {
    for (const w of text.split(" ")) words.add(w);
  }
  const tokens = ["<s>", "</s>", "<mask>", "<pad>"];
  for (let b = 0; b < 256; b++) {
    tokens.push(`<0x${b.toString(16).toUpperCase().padStart(2, "0")}>`);
  }
  for (const w of [...words].sort()) tokens.push(w, " " + w);
  if (tokens.length > vocabSize) {
    throw new Error(`vocabulary needs ${tokens.length} tokens, cap is ${vocabSize}`);
  }
  for (let i = tokens.length; i < vocabSize; i++) tokens.push(`<unused${i}>`);
  const vocab: Vocab = { tokens, bosId: 0, eosId: 1, maskId: 2, padId: 3 };

  const catalogRows = names.map((n) => wordTokens(n, vocab));
  const lMax = Math.max(...catalogRows.map((r) => r.length));

  const triples: Array<[number, number, number]> = [];
  const seen = new Set<string>();
  while (triples.length < nTriples) {
    const h = Math.floor(rand() * nEntities);
    const t = Math.floor(rand() * nEntities);
    const r = Math.floor(rand() * RELATIONS.length);
    if (h === t) continue;
    const key = `${h}:${r}:${t}`;
    if (seen.has(key)) continue;
    seen.add(key);
    triples.push([h, r, t]);
  }
  const shuffled = triples.map((_, i) => i);
  for (let i = shuffled.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [shuffled[i], shuffled[j]] = [shuffled[j], shuffled[i]];
  }
  const validIdx = shuffled.slice(0, nValid);
  const testIdx = shuffled.slice(nValid, nValid + nTest);

  const entityLines = names.map((n, i) => `E${i}\t${n}\t${defs[i]}`);
  fs.writeFileSync(path.join(spec.dir, "entities.tsv"), entityLines.join("\n") + "\n");
  fs.writeFileSync(path.join(spec.dir, "relations.tsv"), RELATIONS.join("\n") + "\n");
  const tsv = (idx: number[]) =>
    idx.map((i) => {
      const [h, r, t] = triples[i];
      return `E${h}\t${RELATIONS[r]}\tE${t}`;
    }).join("\n") + "\n";
  fs.writeFileSync(path.join(spec.dir, "train.tsv"),
    tsv(triples.map((_, i) => i)));
  fs.writeFileSync(path.join(spec.dir, "valid.tsv"), tsv(validIdx));
  fs.writeFileSync(path.join(spec.dir, "test.tsv"), tsv(testIdx));

  const vocabPath = path.join(spec.dir, "vocab.txt");
  const catalogPath = path.join(spec.dir, "catalog.jsonl");
  writeVocab(vocabPath, vocab);
  writeCatalog(catalogPath, catalogRows);
  return {
    dir: spec.dir, vocabPath, catalogPath, nEntities, lMax, vocab,
    triples, validIdx, testIdx,
  };
}
