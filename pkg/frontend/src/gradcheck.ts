/**
 * Gradient checking over the CLI: compare the compiler's gradient function
 * against central finite differences computed purely through repeated `run`
 * calls.  The step for element j is h * max(1, |x_j|); relative error uses
 * denominator max(1, |analytic|, |numeric|).
 */

import { gradientDocument, run, type RunOptions } from "./runner.js";
import type { TensorData } from "./types.js";

export interface ParameterReport {
  parameter: number;
  maxRelativeError: number;
  worstElement: number;
}

export interface GradCheckReport {
  perParameter: ParameterReport[];
  maxRelativeError: number;
}

function scalarResult(results: TensorData[]): number {
  const value = results[0].data[0];
  if (typeof value !== "number") throw new Error("expected a numeric scalar result");
  return value;
}

function withElement(tensor: TensorData, index: number, value: number): TensorData {
  const data = [...tensor.data];
  data[index] = value;
  return { ...tensor, data };
}

export function gradCheck(
  documentText: string,
  point: TensorData[],
  h = 1e-6,
  options?: RunOptions,
): GradCheckReport {
  const gradText = gradientDocument(documentText, undefined, options);
  const seed: TensorData = { elementType: "F64", shape: [], data: [1.0] };
  const analytic = run(gradText, [...point, seed], options).results;

  const perParameter: ParameterReport[] = [];
  for (let p = 0; p < point.length; p++) {
    const base = point[p];
    const grads = analytic[p].data as number[];
    let worst = 0;
    let worstElement = 0;
    for (let j = 0; j < base.data.length; j++) {
      const x = base.data[j] as number;
      const step = h * Math.max(1, Math.abs(x));
      const bumped = [...point];
      bumped[p] = withElement(base, j, x + step);
      const plus = scalarResult(run(documentText, bumped, options).results);
      bumped[p] = withElement(base, j, x - step);
      const minus = scalarResult(run(documentText, bumped, options).results);
      const numeric = (plus - minus) / (2 * step);
      const a = grads[j];
      const err = Math.abs(a - numeric) / Math.max(1, Math.abs(a), Math.abs(numeric));
      if (err > worst) {
        worst = err;
        worstElement = j;
      }
    }
    perParameter.push({ parameter: p, maxRelativeError: worst, worstElement });
  }
  return {
    perParameter,
    maxRelativeError: Math.max(0, ...perParameter.map((r) => r.maxRelativeError)),
  };
}
