/** Wire-format types shared by the builder and the CLI bridge. */

export type ElementType = "F32" | "F64" | "I64" | "BOOL";

export type ScalarValue = number | boolean;

/** One node entry of a function document. */
export interface NodeDocument {
  id: number;
  op: string;
  attrs: Record<string, unknown>;
  inputs: [number, number][];
}

export interface FunctionDocument {
  name: string;
  nodes: NodeDocument[];
  parameters: number[];
  results: [number, number][];
}

/** Tensor exchanged with the CLI: logical row-major values. */
export interface TensorData {
  elementType: ElementType;
  shape: number[];
  data: ScalarValue[];
}

export function elementCount(shape: readonly number[]): number {
  return shape.reduce((a, b) => a * b, 1);
}

export class ShapeError extends Error {}

/** Exit-code mapped failures from the CLI subprocess. */
export class CliError extends Error {
  constructor(
    message: string,
    readonly exitCode: number,
    readonly diagnostics: string,
  ) {
    super(message);
  }
}

/** Exit 2: the document or an input failed validation. */
export class CliValidationError extends CliError {}

/** Exit 3: execution failed at runtime. */
export class CliExecutionError extends CliError {}

/** Exit 4: the invocation itself was malformed. */
export class CliUsageError extends CliError {}

/** The binary could not be started at all. */
export class CliEnvironmentError extends Error {}
