/** Thin, mockable wrapper around synchronous CLI invocation. */

import { execFileSync } from "node:child_process";

export interface SubprocessResult {
  exitCode: number;
  stdout: string;
  stderr: string;
}

export type RunSubprocess = (
  command: string,
  args: string[],
  options?: { cwd?: string },
) => SubprocessResult;

export const runSubprocess: RunSubprocess = (command, args, options) => {
  try {
    const stdout = execFileSync(command, args, {
      cwd: options?.cwd,
      encoding: "utf-8",
      stdio: ["pipe", "pipe", "pipe"],
      maxBuffer: 64 * 1024 * 1024,
    });
    return { exitCode: 0, stdout: stdout ?? "", stderr: "" };
  } catch (err: unknown) {
    const e = err as {
      status?: number | null;
      code?: string;
      stdout?: string;
      stderr?: string;
      message?: string;
    };
    if (e.status === undefined || e.status === null) {
      // The process never ran (ENOENT, EACCES, killed before exit).
      return { exitCode: -1, stdout: "", stderr: e.code ?? e.message ?? "spawn failure" };
    }
    return {
      exitCode: e.status,
      stdout: e.stdout ?? "",
      stderr: e.stderr ?? "",
    };
  }
};
