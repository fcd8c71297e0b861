import { execFileSync, spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, describe, expect, it } from "vitest";

import { BuildError, VectorFormatError, runHarness } from "../src/index.js";

const here = dirname(fileURLToPath(import.meta.url));
const fixture = (name: string) => join(here, "fixtures", name);

const haveCompiler = spawnSync("cc", ["--version"]).status === 0;
const haveTagwise = spawnSync("tagwise", ["--version"]).status === 0;

describe.skipIf(!haveCompiler)("harness on static fixtures", () => {
  it("accepts a single-leaf classifier with its one vector", () => {
    const result = runHarness(fixture("leaf.h"), fixture("leaf_vectors.csv"));
    expect(result.vectorsTested).toBe(1);
    expect(result.mismatches).toBe(0);
    expect(result.firstMismatch).toBeUndefined();
  });

  it("agrees on a one-split tree including values exactly at the threshold", () => {
    const vectors = readFileSync(fixture("split_vectors.csv"), "utf-8");
    expect(vectors).toContain("\n2.5,0"); // at-threshold probe takes the left branch
    const result = runHarness(fixture("split.h"), fixture("split_vectors.csv"));
    expect(result.vectorsTested).toBe(9);
    expect(result.mismatches).toBe(0);
  });

  it("reports mismatches with the first failing index for a corrupted threshold", () => {
    const result = runHarness(fixture("split_corrupt.h"), fixture("split_vectors.csv"));
    expect(result.mismatches).toBeGreaterThan(0);
    expect(result.firstMismatch).toBeDefined();
    expect(result.firstMismatch!.index).toBe(0);
    expect(result.firstMismatch!.expected).toBe(0);
    expect(result.firstMismatch!.got).toBe(1);
  });

  it("surfaces vector-file format errors with a line number", () => {
    expect(() => runHarness(fixture("split.h"), fixture("bad_vectors.csv"))).toThrowError(
      VectorFormatError,
    );
    try {
      runHarness(fixture("split.h"), fixture("bad_vectors.csv"));
    } catch (err) {
      expect(String(err)).toMatch(/line 3/);
    }
  });

  it("surfaces compiler output verbatim when the header does not compile", () => {
    const dir = mkdtempSync(join(tmpdir(), "charness-fixture-"));
    try {
      const broken = join(dir, "broken.h");
      const text = readFileSync(fixture("split.h"), "utf-8").replace("} else {", "} garbage {");
      writeFileSync(broken, text);
      expect(() => runHarness(broken, fixture("split_vectors.csv"))).toThrowError(BuildError);
    } finally {
      rmSync(dir, { recursive: true, force: true });
    }
  });
});

describe.skipIf(!haveCompiler || !haveTagwise)("full pipeline agreement", () => {
  const work = mkdtempSync(join(tmpdir(), "charness-pipeline-"));
  afterAll(() => rmSync(work, { recursive: true, force: true }));

  it(
    "depth-14 classifier from the bundled preset matches its reference predictions",
    () => {
      const data = join(work, "data.csv");
      const features = join(work, "features.csv");
      const model = join(work, "model.txt");
      const header = join(work, "classifier.h");
      const vectors = join(work, "vectors.csv");
      const cli = (args: string[]) => execFileSync("tagwise", args, { encoding: "utf-8" });

      cli(["synth", "--preset", "paper-ea60", "--seed", "42", "-o", data]);
      cli(["featurize", data, "-o", features]);
      cli(["train", features, "--depth", "14", "--target", "standing", "--seed", "42", "-o", model]);
      cli([
        "codegen", model,
        "--symbol", "classify",
        "--vectors", vectors,
        "--n-vectors", "10000",
        "--seed", "1010",
        "-o", header,
      ]);

      const result = runHarness(header, vectors);
      expect(result.vectorsTested).toBeGreaterThanOrEqual(10000);
      expect(result.mismatches).toBe(0);
    },
    120_000,
  );
});
