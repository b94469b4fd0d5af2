// Subprocess bridge to the ranking engine's CLI. The adapter never ranks or
// scores anything itself; validation MRR during training and all final
// metrics come from the engine, so there is exactly one scoring semantics.

import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";

const PYTHON = process.env.LINKRANK_PYTHON ?? "python3";

export function runEngine(args: string[]): { stdout: string; stderr: string } {
  const result = spawnSync(PYTHON, ["-m", "linkrank", ...args], {
    encoding: "utf-8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (result.error) throw result.error;
  if (result.status !== 0) {
    throw new Error(
      `linkrank ${args[0]} exited with ${result.status}:\n${result.stderr}`,
    );
  }
  return { stdout: result.stdout, stderr: result.stderr };
}

export interface EvalOptions {
  datasetDir: string;
  style?: string;
  vocabPath: string;
  catalogPath: string;
  split: "valid" | "test";
  mode?: "standard" | "unseen";
  seeds?: number[];
  outDir: string;
  tablesPath?: string;
  scorer?: "constant" | "frequency";
}

export interface EvalReport {
  seeds: number[];
  query_count: number;
  per_seed: Record<string, Record<string, number>>;
  mean: Record<string, number>;
  std: Record<string, number>;
}

export function engineEvaluate(opts: EvalOptions): EvalReport {
  const args = [
    "evaluate",
    "--dataset", opts.datasetDir,
    "--style", opts.style ?? "plain",
    "--vocab", opts.vocabPath,
    "--catalog", opts.catalogPath,
    "--split", opts.split,
    "--mode", opts.mode ?? "standard",
    "--seeds", (opts.seeds ?? [0]).join(","),
    "--out", opts.outDir,
  ];
  if (opts.tablesPath) args.push("--tables", opts.tablesPath);
  else if (opts.scorer) args.push("--scorer", opts.scorer);
  else throw new Error("engineEvaluate needs tablesPath or scorer");
  runEngine(args);
  const report = fs.readFileSync(path.join(opts.outDir, "report.json"), "utf-8");
  return JSON.parse(report) as EvalReport;
}

export interface PrepareOptions {
  datasetDir: string;
  style?: string;
  vocabPath: string;
  catalogPath: string;
  split: "train" | "valid" | "test";
  mode?: "standard" | "unseen";
  maxSeqLen?: number;
  outDir: string;
}

export function enginePrepare(opts: PrepareOptions): string {
  runEngine([
    "prepare",
    "--dataset", opts.datasetDir,
    "--style", opts.style ?? "plain",
    "--vocab", opts.vocabPath,
    "--catalog", opts.catalogPath,
    "--split", opts.split,
    "--mode", opts.mode ?? "standard",
    "--max-seq-len", String(opts.maxSeqLen ?? 512),
    "--out", opts.outDir,
  ]);
  return path.join(opts.outDir, "prompts.jsonl");
}
