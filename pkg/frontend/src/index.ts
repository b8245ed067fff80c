export { GraphBuilder, NodeHandle } from "./builder.js";
export {
  decodeNumber,
  encodeFloat,
  parseTensorDocument,
  printFunctionDocument,
  printTensorDocument,
  pythonFloatRepr,
} from "./format.js";
export { gradCheck, type GradCheckReport, type ParameterReport } from "./gradcheck.js";
export {
  canonicalizeDocument,
  gradientDocument,
  invokeCli,
  resolveBinary,
  run,
  validateDocument,
  type RunOptions,
  type RunResult,
} from "./runner.js";
export { runSubprocess, type RunSubprocess, type SubprocessResult } from "./subprocess.js";
export {
  CliEnvironmentError,
  CliError,
  CliExecutionError,
  CliUsageError,
  CliValidationError,
  ShapeError,
  elementCount,
  type ElementType,
  type FunctionDocument,
  type NodeDocument,
  type ScalarValue,
  type TensorData,
} from "./types.js";
