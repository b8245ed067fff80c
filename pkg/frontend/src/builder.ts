/**
 * Fluent graph builder emitting canonical function documents.
 *
 * Every constructor mirrors the compiler's inference rules and throws
 * ShapeError eagerly, so a document that builds at all also passes
 * `graphforge validate`.
 */

import { pythonFloatRepr, printFunctionDocument } from "./format.js";
import {
  Descriptor,
  inferBroadcast,
  inferConv2d,
  inferDot,
  inferReshape,
  inferSum,
  requireSameDescriptor,
} from "./shapes.js";
import {
  type ElementType,
  type FunctionDocument,
  type NodeDocument,
  type ScalarValue,
  ShapeError,
  elementCount,
} from "./types.js";

export class NodeHandle {
  constructor(
    readonly id: number,
    readonly elementType: ElementType,
    readonly shape: readonly number[],
  ) {}

  get descriptor(): Descriptor {
    return { elementType: this.elementType, shape: [...this.shape] };
  }
}

const FLOAT_TYPES: ElementType[] = ["F32", "F64"];

export class GraphBuilder {
  private nodes: NodeDocument[] = [];
  private params: number[] = [];
  private resultRefs: [number, number][] = [];
  private nextId = 1;

  constructor(readonly name: string) {}

  private push(
    op: string,
    attrs: Record<string, unknown>,
    inputs: NodeHandle[],
    out: Descriptor,
  ): NodeHandle {
    const id = this.nextId++;
    this.nodes.push({
      id,
      op,
      attrs,
      inputs: inputs.map((h) => [h.id, 0]),
    });
    return new NodeHandle(id, out.elementType, out.shape);
  }

  private requireFloat(op: string, handle: NodeHandle): void {
    if (!FLOAT_TYPES.includes(handle.elementType)) {
      throw new ShapeError(`${op} requires a floating element type, got ${handle.elementType}`);
    }
  }

  parameter(elementType: ElementType, shape: number[]): NodeHandle {
    const handle = this.push(
      "Parameter",
      { element_type: elementType, shape: [...shape] },
      [],
      { elementType, shape: [...shape] },
    );
    this.params.push(handle.id);
    return handle;
  }

  constant(elementType: ElementType, shape: number[], data: ScalarValue[]): NodeHandle {
    if (data.length !== elementCount(shape)) {
      throw new ShapeError(
        `constant data length ${data.length} != element count ${elementCount(shape)}`,
      );
    }
    const values =
      elementType === "F32" ? data.map((v) => (typeof v === "number" ? Math.fround(v) : v)) : data;
    for (const v of values) {
      if (typeof v === "number" && Number.isFinite(v)) pythonFloatRepr(v);
    }
    return this.push(
      "Constant",
      { element_type: elementType, shape: [...shape], data: values },
      [],
      { elementType, shape: [...shape] },
    );
  }

  scalar(value: number, elementType: ElementType = "F64"): NodeHandle {
    return this.constant(elementType, [], [value]);
  }

  private binary(op: string, a: NodeHandle, b: NodeHandle): NodeHandle {
    requireSameDescriptor(op, a.descriptor, b.descriptor);
    if (["Divide", "Maximum"].includes(op)) this.requireFloat(op, a);
    return this.push(op, {}, [a, b], a.descriptor);
  }

  private unary(op: string, a: NodeHandle): NodeHandle {
    if (op !== "Negate") this.requireFloat(op, a);
    return this.push(op, {}, [a], a.descriptor);
  }

  add(a: NodeHandle, b: NodeHandle): NodeHandle {
    return this.binary("Add", a, b);
  }

  sub(a: NodeHandle, b: NodeHandle): NodeHandle {
    return this.binary("Subtract", a, b);
  }

  mul(a: NodeHandle, b: NodeHandle): NodeHandle {
    return this.binary("Multiply", a, b);
  }

  div(a: NodeHandle, b: NodeHandle): NodeHandle {
    return this.binary("Divide", a, b);
  }

  maximum(a: NodeHandle, b: NodeHandle): NodeHandle {
    return this.binary("Maximum", a, b);
  }

  neg(a: NodeHandle): NodeHandle {
    return this.unary("Negate", a);
  }

  exp(a: NodeHandle): NodeHandle {
    return this.unary("Exp", a);
  }

  log(a: NodeHandle): NodeHandle {
    return this.unary("Log", a);
  }

  tanh(a: NodeHandle): NodeHandle {
    return this.unary("Tanh", a);
  }

  sigmoid(a: NodeHandle): NodeHandle {
    return this.unary("Sigmoid", a);
  }

  relu(a: NodeHandle): NodeHandle {
    return this.unary("Relu", a);
  }

  dot(a: NodeHandle, b: NodeHandle): NodeHandle {
    this.requireFloat("Dot", a);
    return this.push("Dot", {}, [a, b], inferDot(a.descriptor, b.descriptor));
  }

  broadcast(a: NodeHandle, outputShape: number[], axes: number[]): NodeHandle {
    const out = inferBroadcast(a.descriptor, outputShape, axes);
    const sorted = [...axes].sort((x, y) => x - y);
    return this.push(
      "Broadcast",
      { broadcast_axes: sorted, output_shape: [...outputShape] },
      [a],
      out,
    );
  }

  sum(a: NodeHandle, axes: number[], kind: "sum" | "max" = "sum"): NodeHandle {
    if (kind === "max") this.requireFloat("max-reduce", a);
    const out = inferSum(a.descriptor, axes);
    const sorted = [...axes].sort((x, y) => x - y);
    return this.push("Sum", { reduction_axes: sorted, reduction_kind: kind }, [a], out);
  }

  sumAll(a: NodeHandle): NodeHandle {
    return this.sum(a, a.shape.map((_, i) => i));
  }

  reshape(a: NodeHandle, inputOrder: number[], outputShape: number[]): NodeHandle {
    const out = inferReshape(a.descriptor, inputOrder, outputShape);
    return this.push(
      "Reshape",
      { input_order: [...inputOrder], output_shape: [...outputShape] },
      [a],
      out,
    );
  }

  conv2d(
    data: NodeHandle,
    filter: NodeHandle,
    strides: [number, number] = [1, 1],
    padding: [number, number, number, number] = [0, 0, 0, 0],
  ): NodeHandle {
    this.requireFloat("Conv2D", data);
    const out = inferConv2d(data.descriptor, filter.descriptor, strides, padding);
    return this.push(
      "Conv2D",
      { padding: [...padding], strides: [...strides] },
      [data, filter],
      out,
    );
  }

  convertLayout(a: NodeHandle, order: number[]): NodeHandle {
    this.requireFloat("ConvertLayout", a);
    const sorted = [...order].sort((x, y) => x - y);
    if (sorted.length !== a.shape.length || sorted.some((v, i) => v !== i)) {
      throw new ShapeError(`ConvertLayout: [${order.join(", ")}] is not a permutation`);
    }
    return this.push("ConvertLayout", { order: [...order] }, [a], a.descriptor);
  }

  /** Numerically stabilized softmax composite over one axis. */
  softmax(a: NodeHandle, axis: number): NodeHandle {
    if (axis < 0 || axis >= a.shape.length) {
      throw new ShapeError(`softmax axis ${axis} out of range for rank ${a.shape.length}`);
    }
    const shape = [...a.shape];
    const m = this.sum(a, [axis], "max");
    const centered = this.sub(a, this.broadcast(m, shape, [axis]));
    const e = this.exp(centered);
    const total = this.sum(e, [axis]);
    return this.div(e, this.broadcast(total, shape, [axis]));
  }

  result(handle: NodeHandle): this {
    this.resultRefs.push([handle.id, 0]);
    return this;
  }

  document(): FunctionDocument {
    return {
      name: this.name,
      nodes: this.nodes,
      parameters: [...this.params],
      results: [...this.resultRefs],
    };
  }

  /** Canonical document text, byte-identical to the compiler's printer. */
  build(): string {
    return printFunctionDocument(this.document());
  }
}
