// Finetuning: masked cross-entropy on the gold entity's non-padded tokens,
// gradient-norm clipping, decoupled weight decay, and checkpoint selection by
// the validation MRR that the ranking engine computes on exported tables.

import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";
import { engineEvaluate, enginePrepare } from "./engine.js";
import type { PromptRecord } from "./io.js";
import { readCatalog, readPrompts, readVocab } from "./io.js";
import { exportLogits } from "./export.js";
import { mulberry32 } from "./synthkg.js";
import type { ModelConfig, TrainExample } from "./tinymlm.js";
import { TinyMlm, disposeBatch } from "./tinymlm.js";

export interface TrainOptions {
  epochs: number;
  batchSize: number;
  learningRate: number;
  weightDecay: number;
  clipNorm: number;
  maxSeqLen: number;
  seed: number;
  evalEvery: number; // epochs between engine-evaluated checkpoints
}

export const TRAIN_DEFAULTS: TrainOptions = {
  epochs: 25,
  batchSize: 32,
  learningRate: 2e-5,
  weightDecay: 0.1,
  clipNorm: 1.0,
  maxSeqLen: 512,
  seed: 0,
  evalEvery: 5,
};

export interface FinetuneJob {
  datasetDir: string;
  style?: string;
  vocabPath: string;
  catalogPath: string;
  workDir: string;
  checkpointPath: string;
  model: Omit<ModelConfig, "vocabSize" | "padId">;
  options: TrainOptions;
}

export interface FinetuneResult {
  bestMrr: number;
  bestEpoch: number;
  checkpointPath: string;
  history: Array<{ epoch: number; loss: number; validMrr?: number }>;
}

/** Gold-token labels aligned with the mask span, weights zero at gold padding. */
export function buildExamples(
  prompts: PromptRecord[],
  catalogRows: number[][],
  lMax: number,
  padId: number,
): TrainExample[] {
  return prompts.map((p) => {
    const gold = p.direction === "predict-head" ? p.triple[0] : p.triple[2];
    const row = catalogRows[gold];
    const labels = new Array<number>(lMax).fill(padId);
    const weights = new Array<number>(lMax).fill(0);
    row.forEach((t, j) => {
      labels[j] = t;
      weights[j] = 1;
    });
    return { tokenIds: p.token_ids, maskStart: p.mask_start, labels, weights };
  });
}

export async function finetune(job: FinetuneJob): Promise<FinetuneResult> {
  const opts = job.options;
  for (const key of ["epochs", "batchSize", "learningRate", "weightDecay",
                     "clipNorm", "maxSeqLen", "evalEvery"] as const) {
    const v = opts[key];
    const floor = key === "weightDecay" ? 0 : Number.MIN_VALUE;
    if (!(v >= floor)) throw new Error(`${key} must be positive, got ${v}`);
  }
  fs.mkdirSync(job.workDir, { recursive: true });
  const vocab = readVocab(job.vocabPath);
  const catalogRows = readCatalog(job.catalogPath);
  const lMax = Math.max(...catalogRows.map((r) => r.length));

  const prepare = (split: "train" | "valid") =>
    readPrompts(enginePrepare({
      datasetDir: job.datasetDir,
      style: job.style,
      vocabPath: job.vocabPath,
      catalogPath: job.catalogPath,
      split,
      maxSeqLen: opts.maxSeqLen,
      outDir: path.join(job.workDir, `prep-${split}`),
    }));
  const trainPrompts = prepare("train");
  const validPrompts = prepare("valid");

  const model = TinyMlm.init({
    ...job.model,
    vocabSize: vocab.tokens.length,
    padId: vocab.padId,
  });
  const examples = buildExamples(trainPrompts, catalogRows, lMax, vocab.padId);
  const optimizer = tf.train.adam(opts.learningRate);
  const rand = mulberry32(opts.seed);
  const history: FinetuneResult["history"] = [];
  let bestMrr = -1;
  let bestEpoch = -1;

  const evaluateValid = async (): Promise<number> => {
    const tablesPath = path.join(job.workDir, "valid.mlmt");
    await exportLogits(model, {
      prompts: validPrompts,
      lMax,
      outPath: tablesPath,
      batchSize: 128,
    });
    const report = engineEvaluate({
      datasetDir: job.datasetDir,
      style: job.style,
      vocabPath: job.vocabPath,
      catalogPath: job.catalogPath,
      split: "valid",
      seeds: [0],
      outDir: path.join(job.workDir, "valid-eval"),
      tablesPath,
    });
    return report.mean["mrr"];
  };

  let step = 0;
  for (let epoch = 1; epoch <= opts.epochs; epoch++) {
    // head- and tail-prediction examples interleave uniformly at random
    const order = examples.map((_, i) => i);
    for (let i = order.length - 1; i > 0; i--) {
      const j = Math.floor(rand() * (i + 1));
      [order[i], order[j]] = [order[j], order[i]];
    }
    let lossSum = 0;
    let batches = 0;
    for (let at = 0; at < order.length; at += opts.batchSize) {
      const chunk = order.slice(at, at + opts.batchSize).map((i) => examples[i]);
      const batch = model.encodeBatch(chunk, lMax);
      const loss = model.trainStep(
        batch, optimizer, opts.clipNorm, opts.weightDecay, opts.learningRate);
      disposeBatch(batch);
      step += 1;
      if (!Number.isFinite(loss)) {
        throw new Error(`training diverged: loss ${loss} at step ${step} (seed ${opts.seed})`);
      }
      lossSum += loss;
      batches += 1;
    }
    const entry: FinetuneResult["history"][number] = {
      epoch,
      loss: lossSum / Math.max(1, batches),
    };
    if (epoch % opts.evalEvery === 0 || epoch === opts.epochs) {
      entry.validMrr = await evaluateValid();
      if (entry.validMrr > bestMrr) {
        bestMrr = entry.validMrr;
        bestEpoch = epoch;
        model.save(job.checkpointPath);
      }
    }
    history.push(entry);
  }
  model.dispose();
  return { bestMrr, bestEpoch, checkpointPath: job.checkpointPath, history };
}
