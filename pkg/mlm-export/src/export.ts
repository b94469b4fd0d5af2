// Turning prepared prompts into MLMT logit tables: one model call per query,
// sliced at the mask span, written in prompt order.

import * as fs from "node:fs";
import * as path from "node:path";
import * as tf from "@tensorflow/tfjs";
import type { PromptRecord } from "./io.js";
import { writeTableManifest } from "./io.js";
import { MlmtWriter } from "./mlmt.js";

export interface SpanScorer {
  readonly vocabSize: number;
  spanLogits(prompts: PromptRecord[], lMax: number, batchSize?: number):
    Promise<Float32Array[]>;
}

/** Constant-output stub: every query gets an all-zero table. */
export class StubConstantLm implements SpanScorer {
  constructor(readonly vocabSize: number) {}

  async spanLogits(prompts: PromptRecord[], lMax: number): Promise<Float32Array[]> {
    return prompts.map(() => new Float32Array(lMax * this.vocabSize));
  }
}

/**
 * Adapter over a converted tfjs GraphModel whose single int32 input is
 * [batch, seq] token ids and whose single output is [batch, seq, vocab]
 * logits. This is the hook for running a real pretrained masked LM that has
 * been converted to the tfjs graph format.
 */
export class GraphModelLm implements SpanScorer {
  private constructor(
    private model: tf.GraphModel,
    readonly vocabSize: number,
    readonly padId: number,
  ) {}

  static async load(dir: string, vocabSize: number, padId: number):
      Promise<GraphModelLm> {
    const url = "file://" + path.join(dir, "model.json");
    const model = await tf.loadGraphModel(url);
    return new GraphModelLm(model, vocabSize, padId);
  }

  async spanLogits(prompts: PromptRecord[], lMax: number, batchSize = 8):
      Promise<Float32Array[]> {
    const out: Float32Array[] = [];
    for (let at = 0; at < prompts.length; at += batchSize) {
      const chunk = prompts.slice(at, at + batchSize);
      const seqLen = Math.max(...chunk.map((p) => p.token_ids.length));
      const ids = new Int32Array(chunk.length * seqLen).fill(this.padId);
      chunk.forEach((p, i) => ids.set(p.token_ids, i * seqLen));
      const input = tf.tensor2d(ids, [chunk.length, seqLen], "int32");
      const logits = this.model.predict(input) as tf.Tensor3D;
      const data = await logits.data();
      const [, t, v] = logits.shape;
      chunk.forEach((p, i) => {
        const table = new Float32Array(lMax * this.vocabSize);
        for (let j = 0; j < lMax; j++) {
          const row = data.subarray(
            (i * t + p.mask_start + j) * v,
            (i * t + p.mask_start + j) * v + this.vocabSize,
          );
          table.set(row, j * this.vocabSize);
        }
        out.push(table);
      });
      input.dispose();
      logits.dispose();
    }
    return out;
  }
}

export interface ExportJob {
  prompts: PromptRecord[];
  lMax: number;
  outPath: string;
  manifestPath?: string;
  batchSize?: number;
}

export async function exportLogits(scorer: SpanScorer, job: ExportJob):
    Promise<number> {
  const { prompts, lMax } = job;
  for (const p of prompts) {
    const spanEnd = p.mask_start + lMax;
    if (spanEnd > p.token_ids.length) {
      throw new Error(
        `query ${p.query_id}: mask span [${p.mask_start}, ${spanEnd}) ` +
          `does not fit its ${p.token_ids.length}-token prompt`,
      );
    }
  }
  fs.mkdirSync(path.dirname(path.resolve(job.outPath)), { recursive: true });
  const writer = new MlmtWriter(job.outPath, scorer.vocabSize, lMax);
  try {
    const batchSize = job.batchSize ?? 64;
    for (let at = 0; at < prompts.length; at += batchSize) {
      const chunk = prompts.slice(at, at + batchSize);
      const tables = await scorer.spanLogits(chunk, lMax, batchSize);
      chunk.forEach((p, i) =>
        writer.add({ queryId: p.query_id, values: tables[i] }));
    }
  } finally {
    writer.close();
  }
  if (job.manifestPath) {
    writeTableManifest(job.manifestPath, prompts, scorer.vocabSize, lMax);
  }
  return writer.count;
}
