// Adapter CLI: make-tiny-kg | finetune | export.

import * as fs from "node:fs";
import * as path from "node:path";
import { initBackend } from "./backend.js";
import { exportLogits, GraphModelLm, StubConstantLm } from "./export.js";
import { readPrompts, readVocab } from "./io.js";
import { makeTinyKg } from "./synthkg.js";
import { TinyMlm } from "./tinymlm.js";
import { TRAIN_DEFAULTS, finetune } from "./train.js";

type FlagSpec = Record<string, { kind: "str" | "num" | "flag"; value?: unknown }>;

function parseFlags(argv: string[], spec: FlagSpec): Record<string, unknown> {
  const out: Record<string, unknown> = {};
  for (const [name, s] of Object.entries(spec)) {
    if (s.value !== undefined) out[name] = s.value;
  }
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith("--")) throw new Error(`unexpected argument ${arg}`);
    const name = arg.slice(2);
    const s = spec[name];
    if (!s) throw new Error(`unknown flag --${name}`);
    if (s.kind === "flag") {
      out[name] = true;
      continue;
    }
    const raw = argv[++i];
    if (raw === undefined) throw new Error(`--${name} needs a value`);
    out[name] = s.kind === "num" ? Number(raw) : raw;
  }
  return out;
}

function need(flags: Record<string, unknown>, name: string): string {
  const v = flags[name];
  if (v === undefined) throw new Error(`--${name} is required`);
  return String(v);
}

async function cmdMakeTinyKg(argv: string[]): Promise<void> {
  const flags = parseFlags(argv, {
    dir: { kind: "str" },
    entities: { kind: "num", value: 50 },
    triples: { kind: "num", value: 150 },
    valid: { kind: "num", value: 30 },
    test: { kind: "num", value: 40 },
    "vocab-size": { kind: "num", value: 1000 },
    seed: { kind: "num", value: 42 },
  });
  const kg = makeTinyKg({
    dir: need(flags, "dir"),
    nEntities: flags["entities"] as number,
    nTriples: flags["triples"] as number,
    nValid: flags["valid"] as number,
    nTest: flags["test"] as number,
    vocabSize: flags["vocab-size"] as number,
    seed: flags["seed"] as number,
  });
  console.log(`tiny kg in ${kg.dir}: ${kg.nEntities} entities, ` +
    `${kg.triples.length} facts, l_max ${kg.lMax}, vocab ${kg.vocab.tokens.length}`);
}

async function cmdFinetune(argv: string[]): Promise<void> {
  const flags = parseFlags(argv, {
    dataset: { kind: "str" },
    style: { kind: "str", value: "plain" },
    vocab: { kind: "str" },
    catalog: { kind: "str" },
    work: { kind: "str" },
    out: { kind: "str" },
    epochs: { kind: "num", value: TRAIN_DEFAULTS.epochs },
    "batch-size": { kind: "num", value: TRAIN_DEFAULTS.batchSize },
    "learning-rate": { kind: "num", value: TRAIN_DEFAULTS.learningRate },
    "weight-decay": { kind: "num", value: TRAIN_DEFAULTS.weightDecay },
    "clip-norm": { kind: "num", value: TRAIN_DEFAULTS.clipNorm },
    "max-seq-len": { kind: "num", value: TRAIN_DEFAULTS.maxSeqLen },
    seed: { kind: "num", value: TRAIN_DEFAULTS.seed },
    "eval-every": { kind: "num", value: TRAIN_DEFAULTS.evalEvery },
    "d-model": { kind: "num", value: 64 },
    layers: { kind: "num", value: 2 },
    heads: { kind: "num", value: 4 },
    ffn: { kind: "num", value: 256 },
    "max-len": { kind: "num", value: 24 },
  });
  await initBackend();
  const dataset = need(flags, "dataset");
  const result = await finetune({
    datasetDir: dataset,
    style: flags["style"] as string,
    vocabPath: flags["vocab"] !== undefined
      ? String(flags["vocab"]) : path.join(dataset, "vocab.txt"),
    catalogPath: flags["catalog"] !== undefined
      ? String(flags["catalog"]) : path.join(dataset, "catalog.jsonl"),
    workDir: need(flags, "work"),
    checkpointPath: need(flags, "out"),
    model: {
      dModel: flags["d-model"] as number,
      nLayers: flags["layers"] as number,
      nHeads: flags["heads"] as number,
      ffnDim: flags["ffn"] as number,
      maxLen: flags["max-len"] as number,
      seed: flags["seed"] as number,
    },
    options: {
      epochs: flags["epochs"] as number,
      batchSize: flags["batch-size"] as number,
      learningRate: flags["learning-rate"] as number,
      weightDecay: flags["weight-decay"] as number,
      clipNorm: flags["clip-norm"] as number,
      maxSeqLen: flags["max-seq-len"] as number,
      seed: flags["seed"] as number,
      evalEvery: flags["eval-every"] as number,
    },
  });
  for (const h of result.history) {
    const v = h.validMrr === undefined ? "" : `  valid mrr ${h.validMrr.toFixed(4)}`;
    console.log(`epoch ${h.epoch}  loss ${h.loss.toFixed(4)}${v}`);
  }
  console.log(`best valid mrr ${result.bestMrr.toFixed(4)} at epoch ` +
    `${result.bestEpoch}; checkpoint ${result.checkpointPath}`);
}

async function cmdExport(argv: string[]): Promise<void> {
  const flags = parseFlags(argv, {
    prompts: { kind: "str" },
    manifest: { kind: "str" }, // manifest written by `linkrank prepare`
    checkpoint: { kind: "str" },
    "graph-model": { kind: "str" },
    stub: { kind: "flag" },
    out: { kind: "str" },
    "out-manifest": { kind: "str" },
    "batch-size": { kind: "num", value: 64 },
  });
  await initBackend();
  const prompts = readPrompts(need(flags, "prompts"));
  const prep = JSON.parse(fs.readFileSync(need(flags, "manifest"), "utf-8")) as {
    l_max: number;
    vocab_size: number;
  };

  let scorer;
  if (flags["stub"]) {
    scorer = new StubConstantLm(prep.vocab_size);
  } else if (flags["checkpoint"] !== undefined) {
    const model = TinyMlm.load(String(flags["checkpoint"]));
    if (model.config.vocabSize !== prep.vocab_size) {
      throw new Error(
        `checkpoint vocabulary ${model.config.vocabSize} does not match ` +
          `prepared prompts (${prep.vocab_size}); aborting before inference`);
    }
    scorer = model;
  } else if (flags["graph-model"] !== undefined) {
    const dir = String(flags["graph-model"]);
    const vocab = readVocab(path.join(dir, "vocab.txt"));
    if (vocab.tokens.length !== prep.vocab_size) {
      throw new Error(
        `model vocabulary ${vocab.tokens.length} does not match prepared ` +
          `prompts (${prep.vocab_size}); aborting before inference`);
    }
    scorer = await GraphModelLm.load(dir, vocab.tokens.length, vocab.padId);
  } else {
    throw new Error("export needs --checkpoint, --graph-model, or --stub");
  }

  const count = await exportLogits(scorer, {
    prompts,
    lMax: prep.l_max,
    outPath: need(flags, "out"),
    manifestPath: flags["out-manifest"] as string | undefined,
    batchSize: flags["batch-size"] as number,
  });
  console.log(`exported ${count} logit tables to ${flags["out"]}`);
}

const USAGE = `usage: mlm-export <command> [flags]
  make-tiny-kg  --dir DIR [--entities N --triples N --valid N --test N --vocab-size N --seed N]
  finetune      --dataset DIR --work DIR --out CKPT [training flags]
  export        --prompts FILE --manifest FILE (--checkpoint CKPT | --graph-model DIR | --stub)
                --out FILE.mlmt [--out-manifest FILE --batch-size N]`;

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  try {
    if (command === "make-tiny-kg") await cmdMakeTinyKg(rest);
    else if (command === "finetune") await cmdFinetune(rest);
    else if (command === "export") await cmdExport(rest);
    else {
      console.error(USAGE);
      return 1;
    }
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
