// A small trainable masked language model: bidirectional pre-LN transformer
// encoder with learned positions and an untied output projection.
//
// Lookups are expressed as one-hot matmuls rather than gathers because the
// wasm backend has no gather gradient kernels; at this scale the one-hot
// products are cheap and their gradients are ordinary matmuls.

import * as fs from "node:fs";
import * as tf from "@tensorflow/tfjs";
import type { PromptRecord } from "./io.js";

export interface ModelConfig {
  vocabSize: number;
  dModel: number;
  nLayers: number;
  nHeads: number;
  ffnDim: number;
  maxLen: number;
  padId: number;
  seed: number;
}

export interface TrainExample {
  tokenIds: number[];
  maskStart: number;
  labels: number[]; // gold entity tokens padded to lMax with padId
  weights: number[]; // 1 where the gold token is real, 0 at gold padding
}

export interface EncodedBatch {
  tokens: tf.Tensor2D; // int32 [B, maxLen]
  keyMask: tf.Tensor2D; // float32 [B, maxLen], 1 on real tokens
  selection: tf.Tensor3D; // float32 [B, lMax, maxLen] one-hot mask positions
  labelsOh: tf.Tensor3D; // float32 [B, lMax, V]
  weights: tf.Tensor2D; // float32 [B, lMax]
  size: number;
}

export class TinyMlm {
  readonly vars: Record<string, tf.Variable> = {};

  private constructor(readonly config: ModelConfig) {}

  get vocabSize(): number {
    return this.config.vocabSize;
  }

  static init(config: ModelConfig): TinyMlm {
    const m = new TinyMlm(config);
    const { vocabSize: v, dModel: d, ffnDim: f, maxLen, seed } = config;
    let k = 0;
    const rnd = (shape: number[], std: number) =>
      tf.variable(tf.randomNormal(shape, 0, std, "float32", seed + k++));
    m.vars["emb"] = rnd([v, d], 0.02);
    m.vars["pos"] = rnd([maxLen, d], 0.02);
    for (let layer = 0; layer < config.nLayers; layer++) {
      for (const name of ["wq", "wk", "wv", "wo"]) {
        m.vars[`${name}${layer}`] = rnd([d, d], 0.02);
      }
      m.vars[`w1_${layer}`] = rnd([d, f], 0.02);
      m.vars[`b1_${layer}`] = tf.variable(tf.zeros([f]));
      m.vars[`w2_${layer}`] = rnd([f, d], 0.02);
      m.vars[`b2_${layer}`] = tf.variable(tf.zeros([d]));
      for (const ln of ["a", "b"]) {
        m.vars[`ln${ln}_g${layer}`] = tf.variable(tf.ones([d]));
        m.vars[`ln${ln}_b${layer}`] = tf.variable(tf.zeros([d]));
      }
    }
    m.vars["lnf_g"] = tf.variable(tf.ones([d]));
    m.vars["lnf_b"] = tf.variable(tf.zeros([d]));
    m.vars["out"] = rnd([v, d], 0.02);
    m.vars["out_b"] = tf.variable(tf.zeros([v]));
    return m;
  }

  dispose(): void {
    for (const v of Object.values(this.vars)) v.dispose();
  }

  private layerNorm(x: tf.Tensor, g: tf.Variable, b: tf.Variable): tf.Tensor {
    const { mean, variance } = tf.moments(x, -1, true);
    return x.sub(mean).div(variance.add(1e-5).sqrt()).mul(g).add(b);
  }

  /** Logits at the selected span positions: [B, lMax, V]. */
  spanLogitsTensor(
    tokens: tf.Tensor2D,
    keyMask: tf.Tensor2D,
    selection: tf.Tensor3D,
  ): tf.Tensor3D {
    const { vocabSize: v, dModel: d, nHeads, maxLen } = this.config;
    const dh = d / nHeads;
    const [b, t] = tokens.shape;
    const lMax = selection.shape[1];

    const tokOh = tf.oneHot(tokens, v).cast("float32").reshape([b * t, v]);
    let x = tf
      .matMul(tokOh, this.vars["emb"])
      .reshape([b, t, d])
      .add(this.vars["pos"].slice([0, 0], [t, d]));
    // keys at padding get a large negative bias before softmax
    const attBias = keyMask.sub(1).mul(1e9).reshape([b, 1, 1, t]);

    for (let layer = 0; layer < this.config.nLayers; layer++) {
      const h = this.layerNorm(
        x, this.vars[`lna_g${layer}`], this.vars[`lna_b${layer}`]);
      const flat = h.reshape([b * t, d]);
      const toHeads = (w: tf.Variable) =>
        tf.matMul(flat, w).reshape([b, t, nHeads, dh]).transpose([0, 2, 1, 3]);
      const q = toHeads(this.vars[`wq${layer}`]);
      const kk = toHeads(this.vars[`wk${layer}`]);
      const vv = toHeads(this.vars[`wv${layer}`]);
      const scores = tf.matMul(q, kk, false, true).div(Math.sqrt(dh)).add(attBias);
      const mixed = tf
        .matMul(tf.softmax(scores), vv)
        .transpose([0, 2, 1, 3])
        .reshape([b * t, d]);
      x = x.add(tf.matMul(mixed, this.vars[`wo${layer}`]).reshape([b, t, d]));

      const h2 = this.layerNorm(
        x, this.vars[`lnb_g${layer}`], this.vars[`lnb_b${layer}`]);
      const ffn = tf
        .matMul(h2.reshape([b * t, d]), this.vars[`w1_${layer}`])
        .add(this.vars[`b1_${layer}`])
        .relu()
        .matMul(this.vars[`w2_${layer}`])
        .add(this.vars[`b2_${layer}`]);
      x = x.add(ffn.reshape([b, t, d]));
    }

    const hf = this.layerNorm(x, this.vars["lnf_g"], this.vars["lnf_b"]);
    const picked = tf.matMul(selection, hf); // [B, lMax, d]
    return tf
      .matMul(picked.reshape([b * lMax, d]), this.vars["out"], false, true)
      .add(this.vars["out_b"])
      .reshape([b, lMax, v]);
  }

  /** Mean cross-entropy over the non-padded gold tokens of the batch. */
  loss(batch: EncodedBatch): tf.Scalar {
    return tf.tidy(() => {
      const logits = this.spanLogitsTensor(batch.tokens, batch.keyMask, batch.selection);
      const logProbs = tf.logSoftmax(logits);
      const picked = tf.sum(logProbs.mul(batch.labelsOh), -1); // [B, lMax]
      const weightSum = tf.sum(batch.weights);
      return tf.neg(tf.sum(picked.mul(batch.weights)).div(weightSum)).asScalar();
    });
  }

  encodeBatch(examples: TrainExample[], lMax: number): EncodedBatch {
    const { maxLen, padId, vocabSize: v } = this.config;
    const b = examples.length;
    const tokens = new Int32Array(b * maxLen).fill(padId);
    const keyMask = new Float32Array(b * maxLen);
    const positions = new Int32Array(b * lMax);
    const labels = new Int32Array(b * lMax);
    const weights = new Float32Array(b * lMax);
    examples.forEach((ex, i) => {
      if (ex.tokenIds.length > maxLen) {
        throw new Error(`prompt of ${ex.tokenIds.length} tokens exceeds maxLen ${maxLen}`);
      }
      tokens.set(ex.tokenIds, i * maxLen);
      keyMask.fill(1, i * maxLen, i * maxLen + ex.tokenIds.length);
      for (let j = 0; j < lMax; j++) {
        positions[i * lMax + j] = ex.maskStart + j;
        labels[i * lMax + j] = ex.labels[j];
        weights[i * lMax + j] = ex.weights[j];
      }
    });
    return tf.tidy(() => ({
      tokens: tf.tensor2d(tokens, [b, maxLen], "int32"),
      keyMask: tf.tensor2d(keyMask, [b, maxLen]),
      selection: tf
        .oneHot(tf.tensor2d(positions, [b, lMax], "int32"), maxLen)
        .cast("float32") as tf.Tensor3D,
      labelsOh: tf
        .oneHot(tf.tensor2d(labels, [b, lMax], "int32"), v)
        .cast("float32") as tf.Tensor3D,
      weights: tf.tensor2d(weights, [b, lMax]),
      size: b,
    }));
  }

  /** One optimizer step; returns the batch loss. */
  trainStep(
    batch: EncodedBatch,
    optimizer: tf.Optimizer,
    clipNorm: number,
    weightDecay: number,
    learningRate: number,
  ): number {
    const varList = Object.values(this.vars);
    const { value, grads } = tf.variableGrads(() => this.loss(batch), varList);
    const lossValue = value.dataSync()[0];
    value.dispose();

    let normSq = 0;
    for (const g of Object.values(grads)) {
      normSq += g.square().sum().dataSync()[0];
    }
    const norm = Math.sqrt(normSq);
    if (norm > clipNorm) {
      const scale = clipNorm / norm;
      for (const name of Object.keys(grads)) {
        const scaled = grads[name].mul(scale);
        grads[name].dispose();
        grads[name] = scaled;
      }
    }
    optimizer.applyGradients(grads);
    for (const g of Object.values(grads)) g.dispose();

    if (weightDecay > 0) {
      // decoupled decay on the 2D weights, not on gains or biases
      for (const [name, v] of Object.entries(this.vars)) {
        if (v.shape.length === 2 && name !== "pos") {
          v.assign(v.mul(1 - learningRate * weightDecay));
        }
      }
    }
    return lossValue;
  }

  async spanLogits(prompts: PromptRecord[], lMax: number, batchSize = 64):
      Promise<Float32Array[]> {
    const out: Float32Array[] = [];
    for (let at = 0; at < prompts.length; at += batchSize) {
      const chunk = prompts.slice(at, at + batchSize);
      const examples: TrainExample[] = chunk.map((p) => ({
        tokenIds: p.token_ids,
        maskStart: p.mask_start,
        labels: new Array(lMax).fill(this.config.padId),
        weights: new Array(lMax).fill(0),
      }));
      const batch = this.encodeBatch(examples, lMax);
      const logits = tf.tidy(() =>
        this.spanLogitsTensor(batch.tokens, batch.keyMask, batch.selection));
      const data = await logits.data();
      const step = lMax * this.config.vocabSize;
      for (let i = 0; i < chunk.length; i++) {
        out.push(new Float32Array(data.subarray(i * step, (i + 1) * step)));
      }
      logits.dispose();
      disposeBatch(batch);
    }
    return out;
  }

  save(path: string): void {
    const weights: Record<string, { shape: number[]; data: string }> = {};
    for (const [name, v] of Object.entries(this.vars)) {
      const data = v.dataSync() as Float32Array;
      weights[name] = {
        shape: v.shape.slice(),
        data: Buffer.from(data.buffer, data.byteOffset, data.byteLength)
          .toString("base64"),
      };
    }
    fs.writeFileSync(path, JSON.stringify({ config: this.config, weights }));
  }

  static load(path: string): TinyMlm {
    const raw = JSON.parse(fs.readFileSync(path, "utf-8")) as {
      config: ModelConfig;
      weights: Record<string, { shape: number[]; data: string }>;
    };
    const m = new TinyMlm(raw.config);
    for (const [name, w] of Object.entries(raw.weights)) {
      const buf = Buffer.from(w.data, "base64");
      const arr = new Float32Array(buf.buffer, buf.byteOffset, buf.byteLength / 4);
      m.vars[name] = tf.variable(tf.tensor(Array.from(arr), w.shape, "float32"));
    }
    return m;
  }
}

export function disposeBatch(batch: EncodedBatch): void {
  batch.tokens.dispose();
  batch.keyMask.dispose();
  batch.selection.dispose();
  batch.labelsOh.dispose();
  batch.weights.dispose();
}
