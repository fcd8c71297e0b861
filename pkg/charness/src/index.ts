/**
 * Compile-and-run driver for generated classifier headers.
 *
 * Builds the generic C harness against one header, feeds it a vector CSV,
 * and reports agreement between the compiled classifier and the expected
 * classes recorded in the file.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join, resolve } from "node:path";
import { fileURLToPath } from "node:url";

export interface MismatchDetail {
  index: number;
  expected: number;
  got: number;
}

export interface HarnessResult {
  vectorsTested: number;
  mismatches: number;
  firstMismatch?: MismatchDetail;
}

/** Compilation of the harness + header failed; message carries the compiler output. */
export class BuildError extends Error {}

/** The vector file was rejected by the harness; message carries the line diagnostic. */
export class VectorFormatError extends Error {}

export interface RunOptions {
  cc?: string; // compiler binary, default "cc"
}

const HARNESS_SOURCE = resolve(dirname(fileURLToPath(import.meta.url)), "..", "harness.c");

function entrySymbol(headerPath: string): string {
  const text = readFileSync(headerPath, "utf-8");
  const match = text.match(/static int ([A-Za-z_][A-Za-z0-9_]*)\(/);
  if (!match) {
    throw new BuildError(`no classifier entry function found in ${headerPath}`);
  }
  return match[1];
}

export function compileHarness(headerPath: string, opts: RunOptions = {}): {
  binary: string;
  cleanup: () => void;
} {
  const symbol = entrySymbol(headerPath);
  const workDir = mkdtempSync(join(tmpdir(), "charness-"));
  const binary = join(workDir, "harness");
  const args = [
    "-O2",
    "-o", binary,
    HARNESS_SOURCE,
    `-DCLASSIFIER_HEADER="${resolve(headerPath)}"`,
    `-DCLASSIFIER_SYM=${symbol}`,
    `-DCLASSIFIER_SYM_UPPER=${symbol.toUpperCase()}`,
    "-lm",
  ];
  const build = spawnSync(opts.cc ?? "cc", args, { encoding: "utf-8" });
  if (build.error || build.status !== 0) {
    rmSync(workDir, { recursive: true, force: true });
    const detail = build.error ? String(build.error) : `${build.stdout}${build.stderr}`;
    throw new BuildError(detail.trim());
  }
  return { binary, cleanup: () => rmSync(workDir, { recursive: true, force: true }) };
}

function parseOutput(stdout: string): HarnessResult {
  const result: HarnessResult = { vectorsTested: 0, mismatches: 0 };
  for (const line of stdout.split("\n")) {
    const vectors = line.match(/^vectors (\d+)$/);
    if (vectors) result.vectorsTested = Number(vectors[1]);
    const mis = line.match(/^mismatches (\d+)$/);
    if (mis) result.mismatches = Number(mis[1]);
    const first = line.match(/^first_mismatch index=(\d+) expected=(\d+) got=(\d+)$/);
    if (first) {
      result.firstMismatch = {
        index: Number(first[1]),
        expected: Number(first[2]),
        got: Number(first[3]),
      };
    }
  }
  return result;
}

/**
 * Compile the harness for a header, run it over a vector CSV, and return
 * the agreement tally. Zero mismatches means the emitted classifier matches
 * the reference predictions on every vector.
 */
export function runHarness(
  headerPath: string,
  vectorsPath: string,
  opts: RunOptions = {},
): HarnessResult {
  const { binary, cleanup } = compileHarness(headerPath, opts);
  try {
    const run = spawnSync(binary, [resolve(vectorsPath)], { encoding: "utf-8" });
    if (run.status === 3) {
      throw new VectorFormatError(run.stderr.trim());
    }
    if (run.status !== 0 && run.status !== 1) {
      throw new Error(`harness failed (${run.status}): ${run.stderr.trim()}`);
    }
    return parseOutput(run.stdout);
  } finally {
    cleanup();
  }
}
