/**
 * CLI bridge: write a document and its input tensors to a temp directory,
 * invoke `graphforge run`, and read back the result tensors.
 *
 * The binary comes from `options.bin`, then the GRAPHFORGE_BIN environment
 * variable, then plain `graphforge` on PATH.  Exit codes 2/3/4 map to
 * distinct error classes; spawn failures map to CliEnvironmentError.
 */

import { mkdtempSync, mkdirSync, readFileSync, rmSync, writeFileSync, existsSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { parseTensorDocument, printTensorDocument } from "./format.js";
import { runSubprocess, type RunSubprocess, type SubprocessResult } from "./subprocess.js";
import {
  CliEnvironmentError,
  CliExecutionError,
  CliUsageError,
  CliValidationError,
  type TensorData,
} from "./types.js";

export interface RunOptions {
  bin?: string;
  /** Skip the optimization pipeline before execution. */
  noOptimize?: boolean;
  /** Keep the temp directory for debugging. */
  keepFiles?: boolean;
  exec?: RunSubprocess;
}

export interface RunResult {
  results: TensorData[];
  exitCode: number;
  diagnostics: string;
}

export function resolveBinary(options?: RunOptions): string {
  return options?.bin ?? process.env.GRAPHFORGE_BIN ?? "graphforge";
}

function raiseForExit(result: SubprocessResult, context: string): never {
  const message = `${context}: ${result.stderr.trim() || `exit ${result.exitCode}`}`;
  if (result.exitCode === 2) throw new CliValidationError(message, 2, result.stderr);
  if (result.exitCode === 3) throw new CliExecutionError(message, 3, result.stderr);
  if (result.exitCode === 4) throw new CliUsageError(message, 4, result.stderr);
  throw new CliEnvironmentError(message);
}

export function invokeCli(
  args: string[],
  options?: RunOptions,
  context = "graphforge",
): SubprocessResult {
  const exec = options?.exec ?? runSubprocess;
  const result = exec(resolveBinary(options), args);
  if (result.exitCode === -1) {
    throw new CliEnvironmentError(`${context}: cannot start CLI (${result.stderr.trim()})`);
  }
  if (result.exitCode !== 0) raiseForExit(result, context);
  return result;
}

/** Execute a function document on the given inputs through the CLI. */
export function run(
  documentText: string,
  inputs: TensorData[],
  options?: RunOptions,
): RunResult {
  const dir = mkdtempSync(join(tmpdir(), "graphforge-"));
  try {
    const graphPath = join(dir, "fn.gf.json");
    writeFileSync(graphPath, documentText, "utf-8");
    const args = ["run", graphPath, "--out", join(dir, "out")];
    inputs.forEach((tensor, i) => {
      const path = join(dir, `p${i}.tensor.json`);
      writeFileSync(path, printTensorDocument(tensor), "utf-8");
      args.push("--input", `p${i}=${path}`);
    });
    if (options?.noOptimize) args.push("--no-optimize");
    mkdirSync(join(dir, "out"), { recursive: true });

    const proc = invokeCli(args, options, "run");

    const results: TensorData[] = [];
    for (let j = 0; ; j++) {
      const path = join(dir, "out", `result${j}.tensor.json`);
      if (!existsSync(path)) break;
      results.push(parseTensorDocument(readFileSync(path, "utf-8")));
    }
    return { results, exitCode: 0, diagnostics: proc.stderr };
  } finally {
    if (!options?.keepFiles) rmSync(dir, { recursive: true, force: true });
  }
}

/** Validate a document; true on exit 0, throws on other failures. */
export function validateDocument(documentText: string, options?: RunOptions): boolean {
  const dir = mkdtempSync(join(tmpdir(), "graphforge-"));
  try {
    const path = join(dir, "fn.gf.json");
    writeFileSync(path, documentText, "utf-8");
    invokeCli(["validate", path], options, "validate");
    return true;
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/** Emit the gradient document for `wrt` parameter indices (all by default). */
export function gradientDocument(
  documentText: string,
  wrt?: number[],
  options?: RunOptions,
): string {
  const dir = mkdtempSync(join(tmpdir(), "graphforge-"));
  try {
    const graphPath = join(dir, "fn.gf.json");
    const outPath = join(dir, "grad.gf.json");
    writeFileSync(graphPath, documentText, "utf-8");
    const args = ["grad", graphPath, "--out", outPath];
    if (wrt !== undefined) args.push("--wrt", wrt.map((k) => `p${k}`).join(","));
    invokeCli(args, options, "grad");
    return readFileSync(outPath, "utf-8");
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/** Canonicalize a document through the CLI (an empty optimize pipeline). */
export function canonicalizeDocument(documentText: string, options?: RunOptions): string {
  const dir = mkdtempSync(join(tmpdir(), "graphforge-"));
  try {
    const graphPath = join(dir, "fn.gf.json");
    const outPath = join(dir, "canon.gf.json");
    writeFileSync(graphPath, documentText, "utf-8");
    invokeCli(["optimize", graphPath, "--passes", "", "--out", outPath], options, "optimize");
    return readFileSync(outPath, "utf-8");
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
