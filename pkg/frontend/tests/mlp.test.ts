/**
 * Bridge-equivalence acceptance: a builder-generated MLP executed through
 * the CLI must match this file's independent forward implementation within
 * 1e-6, and gradCheck must report < 1e-5 on the same model.
 */

import { describe, expect, it } from "vitest";

import { GraphBuilder } from "../src/builder.js";
import { gradCheck } from "../src/gradcheck.js";
import { run, validateDocument } from "../src/runner.js";
import type { TensorData } from "../src/types.js";

const B = 2;
const IN = 3;
const HID = 4;
const OUT = 3;

function mlpDocument(): string {
  const b = new GraphBuilder("mlp");
  const x = b.parameter("F64", [B, IN]);
  const w1 = b.parameter("F64", [IN, HID]);
  const w2 = b.parameter("F64", [HID, OUT]);
  const t = b.parameter("F64", [B, OUT]);
  const hidden = b.relu(b.dot(x, w1));
  const probs = b.softmax(b.dot(hidden, w2), 1);
  b.result(b.sumAll(b.mul(probs, t)));
  return b.build();
}

// --- independent local reference (no shared code with the builder path) ---

function matmul(a: number[][], b: number[][]): number[][] {
  return a.map((row) =>
    b[0].map((_, j) => row.reduce((acc, v, k) => acc + v * b[k][j], 0)),
  );
}

function referenceLoss(
  x: number[][],
  w1: number[][],
  w2: number[][],
  t: number[][],
): number {
  const hidden = matmul(x, w1).map((row) => row.map((v) => Math.max(0, v)));
  const logits = matmul(hidden, w2);
  const probs = logits.map((row) => {
    const m = Math.max(...row);
    const exps = row.map((v) => Math.exp(v - m));
    const total = exps.reduce((a, b) => a + b, 0);
    return exps.map((e) => e / total);
  });
  let loss = 0;
  for (let i = 0; i < probs.length; i++) {
    for (let j = 0; j < probs[i].length; j++) loss += probs[i][j] * t[i][j];
  }
  return loss;
}

// --- deterministic pseudo-random points -----------------------------------

function makeRng(seed: number): () => number {
  let state = seed >>> 0 || 1;
  return () => {
    state ^= state << 13;
    state ^= state >>> 17;
    state ^= state << 5;
    return (state >>> 0) / 0xffffffff;
  };
}

function randomMatrix(rng: () => number, rows: number, cols: number): number[][] {
  return Array.from({ length: rows }, () =>
    Array.from({ length: cols }, () => rng() * 4 - 2),
  );
}

function flatten(m: number[][]): number[] {
  return m.flat();
}

function samplePoint(rng: () => number): {
  x: number[][];
  w1: number[][];
  w2: number[][];
  t: number[][];
} {
  for (;;) {
    const x = randomMatrix(rng, B, IN);
    const w1 = randomMatrix(rng, IN, HID);
    const pre = matmul(x, w1);
    if (pre.every((row) => row.every((v) => Math.abs(v) > 1e-3))) {
      return {
        x,
        w1,
        w2: randomMatrix(rng, HID, OUT),
        t: randomMatrix(rng, B, OUT).map((row) => row.map((v) => Math.abs(v) / 4 + 0.1)),
      };
    }
  }
}

function tensors(point: ReturnType<typeof samplePoint>): TensorData[] {
  return [
    { elementType: "F64", shape: [B, IN], data: flatten(point.x) },
    { elementType: "F64", shape: [IN, HID], data: flatten(point.w1) },
    { elementType: "F64", shape: [HID, OUT], data: flatten(point.w2) },
    { elementType: "F64", shape: [B, OUT], data: flatten(point.t) },
  ];
}

describe("bridge equivalence", () => {
  const doc = mlpDocument();

  it("builder MLP passes cmd_validate", () => {
    expect(validateDocument(doc)).toBe(true);
  });

  it("CLI execution matches the local reference within 1e-6", () => {
    const rng = makeRng(0x5eed1);
    for (let trial = 0; trial < 5; trial++) {
      const point = samplePoint(rng);
      const out = run(doc, tensors(point));
      const got = out.results[0].data[0] as number;
      const want = referenceLoss(point.x, point.w1, point.w2, point.t);
      expect(Math.abs(got - want)).toBeLessThan(1e-6);
    }
  });

  it("gradCheck reports < 1e-5 on the MLP", () => {
    const rng = makeRng(0x5eed2);
    const point = samplePoint(rng);
    const report = gradCheck(doc, tensors(point));
    expect(report.perParameter).toHaveLength(4);
    expect(report.maxRelativeError).toBeLessThan(1e-5);
  });
});
