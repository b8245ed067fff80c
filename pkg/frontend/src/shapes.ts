/**
 * Client-side mirror of the compiler's output inference for the ops the
 * builder exposes, so shape errors surface before any subprocess runs.
 */

import { ShapeError, type ElementType, elementCount } from "./types.js";

export interface Descriptor {
  elementType: ElementType;
  shape: number[];
}

function fmt(shape: readonly number[]): string {
  return `[${shape.join(", ")}]`;
}

export function requireSameDescriptor(op: string, a: Descriptor, b: Descriptor): void {
  if (a.elementType !== b.elementType) {
    throw new ShapeError(`${op}: element types differ (${a.elementType} vs ${b.elementType})`);
  }
  if (a.shape.length !== b.shape.length || a.shape.some((d, i) => d !== b.shape[i])) {
    throw new ShapeError(`${op}: shapes differ (${fmt(a.shape)} vs ${fmt(b.shape)})`);
  }
}

export function inferDot(a: Descriptor, b: Descriptor): Descriptor {
  if (a.elementType !== b.elementType) {
    throw new ShapeError("Dot: element types differ");
  }
  if (a.shape.length !== 2 || b.shape.length !== 2) {
    throw new ShapeError(`Dot requires rank-2 inputs, got ${fmt(a.shape)} and ${fmt(b.shape)}`);
  }
  if (a.shape[1] !== b.shape[0]) {
    throw new ShapeError(`Dot inner extents differ: ${fmt(a.shape)} x ${fmt(b.shape)}`);
  }
  return { elementType: a.elementType, shape: [a.shape[0], b.shape[1]] };
}

export function deleteAxes(shape: readonly number[], axes: readonly number[]): number[] {
  const drop = new Set(axes);
  return shape.filter((_, i) => !drop.has(i));
}

export function inferBroadcast(
  arg: Descriptor,
  outputShape: number[],
  axes: number[],
): Descriptor {
  if (new Set(axes).size !== axes.length || axes.some((a) => a >= outputShape.length || a < 0)) {
    throw new ShapeError(`Broadcast: bad axes [${axes.join(", ")}]`);
  }
  const kept = deleteAxes(outputShape, axes);
  if (kept.length !== arg.shape.length || kept.some((d, i) => d !== arg.shape[i])) {
    throw new ShapeError(
      `Broadcast: deleting axes [${axes.join(", ")}] from ${fmt(outputShape)} ` +
        `does not yield ${fmt(arg.shape)}`,
    );
  }
  return { elementType: arg.elementType, shape: [...outputShape] };
}

export function inferSum(arg: Descriptor, axes: number[]): Descriptor {
  if (new Set(axes).size !== axes.length || axes.some((a) => a >= arg.shape.length || a < 0)) {
    throw new ShapeError(`Sum: bad reduction axes [${axes.join(", ")}] for ${fmt(arg.shape)}`);
  }
  return { elementType: arg.elementType, shape: deleteAxes(arg.shape, axes) };
}

export function inferReshape(
  arg: Descriptor,
  inputOrder: number[],
  outputShape: number[],
): Descriptor {
  const sorted = [...inputOrder].sort((a, b) => a - b);
  if (sorted.length !== arg.shape.length || sorted.some((v, i) => v !== i)) {
    throw new ShapeError(
      `Reshape: input_order [${inputOrder.join(", ")}] is not a permutation of rank ${arg.shape.length}`,
    );
  }
  if (elementCount(outputShape) !== elementCount(arg.shape)) {
    throw new ShapeError(`Reshape: element count mismatch ${fmt(arg.shape)} -> ${fmt(outputShape)}`);
  }
  return { elementType: arg.elementType, shape: [...outputShape] };
}

export function inferConv2d(
  data: Descriptor,
  filter: Descriptor,
  strides: [number, number],
  padding: [number, number, number, number],
): Descriptor {
  if (data.shape.length !== 4 || filter.shape.length !== 4) {
    throw new ShapeError("Conv2D requires rank-4 data and filter");
  }
  if (data.elementType !== filter.elementType) {
    throw new ShapeError("Conv2D: element types differ");
  }
  const [, c, h, w] = data.shape;
  const [k, c2, r, s] = filter.shape;
  if (c2 !== c) throw new ShapeError(`Conv2D channel mismatch: input ${c}, filter ${c2}`);
  const [sh, sw] = strides;
  const [pt, pb, pl, pr] = padding;
  if (sh < 1 || sw < 1) throw new ShapeError("Conv2D strides must be >= 1");
  if (h + pt + pb < r || w + pl + pr < s) {
    throw new ShapeError(`Conv2D filter ${r}x${s} larger than padded input`);
  }
  const ho = Math.floor((h + pt + pb - r) / sh) + 1;
  const wo = Math.floor((w + pl + pr - s) / sw) + 1;
  return { elementType: data.elementType, shape: [data.shape[0], k, ho, wo] };
}
