// Backend selection: the wasm backend is ~25x faster than the pure-JS cpu
// backend here, but its kernel coverage decides what the model code may use
// (no gather gradients, so lookups go through one-hot matmuls).

import * as path from "node:path";
import { fileURLToPath } from "node:url";
import * as tf from "@tensorflow/tfjs";
import { setWasmPaths } from "@tensorflow/tfjs-backend-wasm";

let ready: Promise<string> | null = null;

export function initBackend(): Promise<string> {
  if (ready) return ready;
  ready = (async () => {
    const here = path.dirname(fileURLToPath(import.meta.url));
    const wasmDir = path.resolve(
      here,
      "..",
      "node_modules",
      "@tensorflow",
      "tfjs-backend-wasm",
      "dist",
    );
    setWasmPaths(wasmDir + path.sep);
    try {
      if (await tf.setBackend("wasm")) return tf.getBackend();
    } catch {
      // fall through to the JS backend
    }
    await tf.setBackend("cpu");
    return tf.getBackend();
  })();
  return ready;
}
