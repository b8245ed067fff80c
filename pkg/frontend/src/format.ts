/**
 * Canonical document serialization.
 *
 * The compiler's canonical printer is `json.dumps(doc, indent=2)` with nodes
 * sorted by id, attribute keys sorted, floats in round-trip-exact shortest
 * decimal form, and NaN/infinities as the strings "NaN"/"Inf"/"-Inf".  This
 * module reproduces those bytes exactly so builder output is already in
 * canonical form.
 */

import type { FunctionDocument, TensorData } from "./types.js";
import { elementCount } from "./types.js";

/**
 * Shortest round-trip decimal in CPython `repr(float)` style: positional for
 * decimal exponents in [-4, 16), otherwise scientific with a sign and a
 * two-digit-minimum exponent; integral values keep a trailing ".0".
 */
export function pythonFloatRepr(x: number): string {
  if (Number.isNaN(x) || !Number.isFinite(x)) {
    throw new Error("non-finite values are serialized as strings");
  }
  if (x === 0) return Object.is(x, -0) ? "-0.0" : "0.0";
  const sign = x < 0 ? "-" : "";
  const s = Math.abs(x).toString();

  // Normalize to significant digits D and exponent k: value = D[0].D[1..] * 10^k
  let digits: string;
  let k: number;
  if (s.includes("e")) {
    const [mantissa, exp] = s.split("e");
    k = parseInt(exp, 10);
    const point = mantissa.indexOf(".");
    digits = mantissa.replace(".", "");
    if (point >= 0) k += point - 1;
  } else if (s.includes(".")) {
    const [ip, fp] = s.split(".");
    if (ip === "0") {
      const leading = /^0*/.exec(fp)![0].length;
      digits = fp.slice(leading);
      k = -leading - 1;
    } else {
      digits = ip + fp;
      k = ip.length - 1;
    }
  } else {
    digits = s;
    k = s.length - 1;
  }
  digits = digits.replace(/0+$/, "") || "0";

  if (k < -4 || k >= 16) {
    const mant = digits.length > 1 ? `${digits[0]}.${digits.slice(1)}` : digits;
    const expDigits = String(Math.abs(k)).padStart(2, "0");
    return `${sign}${mant}e${k < 0 ? "-" : "+"}${expDigits}`;
  }
  if (k >= 0) {
    if (digits.length <= k + 1) {
      return `${sign}${digits}${"0".repeat(k + 1 - digits.length)}.0`;
    }
    return `${sign}${digits.slice(0, k + 1)}.${digits.slice(k + 1)}`;
  }
  return `${sign}0.${"0".repeat(-k - 1)}${digits}`;
}

export function encodeFloat(v: number): number | string {
  if (Number.isNaN(v)) return "NaN";
  if (v === Infinity) return "Inf";
  if (v === -Infinity) return "-Inf";
  return v;
}

export function decodeNumber(v: number | string | boolean): number | boolean {
  if (v === "NaN") return NaN;
  if (v === "Inf") return Infinity;
  if (v === "-Inf") return -Infinity;
  if (typeof v === "string") throw new Error(`bad numeric string ${v}`);
  return v;
}

type JsonValue =
  | null
  | boolean
  | string
  | JsonValue[]
  | { [key: string]: JsonValue }
  | JsonNumber;

/** A number tagged with how it must be printed. */
class JsonNumber {
  constructor(
    readonly value: number,
    readonly asFloat: boolean,
  ) {}
}

export const float = (v: number) => new JsonNumber(v, true);
export const int = (v: number) => new JsonNumber(v, false);

function serialize(value: JsonValue, indent: number): string {
  const pad = "  ".repeat(indent);
  const inner = "  ".repeat(indent + 1);
  if (value === null) return "null";
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "string") return JSON.stringify(value);
  if (value instanceof JsonNumber) {
    if (!value.asFloat) {
      if (!Number.isInteger(value.value)) throw new Error("expected an integer");
      return String(value.value);
    }
    return pythonFloatRepr(value.value);
  }
  if (Array.isArray(value)) {
    if (value.length === 0) return "[]";
    const items = value.map((v) => inner + serialize(v, indent + 1));
    return `[\n${items.join(",\n")}\n${pad}]`;
  }
  const keys = Object.keys(value);
  if (keys.length === 0) return "{}";
  const items = keys.map(
    (key) => `${inner}${JSON.stringify(key)}: ${serialize(value[key], indent + 1)}`,
  );
  return `{\n${items.join(",\n")}\n${pad}}`;
}

function dataValue(v: number | boolean, et: string): JsonValue {
  if (typeof v === "boolean") return v;
  if (et === "I64") return int(v);
  const encoded = encodeFloat(v);
  return typeof encoded === "string" ? encoded : float(encoded);
}

function attrValue(key: string, raw: unknown, et: string): JsonValue {
  if (key === "data") {
    return (raw as (number | boolean)[]).map((v) => dataValue(v, et));
  }
  if (typeof raw === "string") return raw;
  if (Array.isArray(raw)) return raw.map((v) => int(v as number));
  return int(raw as number);
}

/** Byte-exact mirror of the compiler's canonical function printer. */
export function printFunctionDocument(doc: FunctionDocument): string {
  const nodes = [...doc.nodes].sort((a, b) => a.id - b.id);
  const body: JsonValue = {
    name: doc.name,
    nodes: nodes.map((node) => {
      const et = String(node.attrs["element_type"] ?? "");
      const attrs: { [key: string]: JsonValue } = {};
      for (const key of Object.keys(node.attrs).sort()) {
        attrs[key] = attrValue(key, node.attrs[key], et);
      }
      return {
        id: int(node.id),
        op: node.op,
        attrs,
        inputs: node.inputs.map(([ref, port]) => [int(ref), int(port)]) as JsonValue,
      };
    }),
    parameters: doc.parameters.map(int),
    results: doc.results.map(([ref, port]) => [int(ref), int(port)]) as JsonValue,
  };
  return serialize(body, 0) + "\n";
}

/** Tensor document with logical row-major data under the identity order. */
export function printTensorDocument(tensor: TensorData): string {
  if (tensor.data.length !== elementCount(tensor.shape)) {
    throw new Error(
      `data length ${tensor.data.length} != element count ${elementCount(tensor.shape)}`,
    );
  }
  const body: JsonValue = {
    element_type: tensor.elementType,
    shape: tensor.shape.map(int),
    order: tensor.shape.map((_, i) => int(i)),
    data: tensor.data.map((v) => dataValue(v, tensor.elementType)),
  };
  return serialize(body, 0) + "\n";
}

/** Decode a tensor document, mapping buffer order back to row-major. */
export function parseTensorDocument(text: string): TensorData {
  const doc = JSON.parse(text) as {
    element_type: string;
    shape: number[];
    order: number[];
    data: (number | string | boolean)[];
  };
  const shape = doc.shape;
  const order = doc.order ?? shape.map((_, i) => i);
  const decoded = doc.data.map(decodeNumber);
  const count = elementCount(shape);
  if (decoded.length !== count) throw new Error("tensor data length mismatch");

  // Strides per logical axis: contiguous row-major over the permuted axes.
  const strides = new Array<number>(shape.length).fill(0);
  let stride = 1;
  for (let i = order.length - 1; i >= 0; i--) {
    strides[order[i]] = stride;
    stride *= shape[order[i]];
  }
  const data = new Array<number | boolean>(count);
  const index = new Array<number>(shape.length).fill(0);
  for (let flat = 0; flat < count; flat++) {
    let pos = 0;
    for (let axis = 0; axis < shape.length; axis++) pos += index[axis] * strides[axis];
    data[flat] = decoded[pos];
    for (let axis = shape.length - 1; axis >= 0; axis--) {
      index[axis] += 1;
      if (index[axis] < shape[axis]) break;
      index[axis] = 0;
    }
  }
  return { elementType: doc.element_type as TensorData["elementType"], shape, data };
}
