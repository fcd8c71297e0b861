#!/usr/bin/env node
import { BuildError, VectorFormatError, runHarness } from "./index.js";

function main(argv: string[]): number {
  if (argv.length !== 2) {
    console.error("usage: charness <classifier.h> <vectors.csv>");
    return 2;
  }
  try {
    const result = runHarness(argv[0], argv[1]);
    console.log(`vectors ${result.vectorsTested}`);
    console.log(`mismatches ${result.mismatches}`);
    if (result.firstMismatch) {
      const { index, expected, got } = result.firstMismatch;
      console.log(`first_mismatch index=${index} expected=${expected} got=${got}`);
    }
    return result.mismatches === 0 ? 0 : 1;
  } catch (err) {
    if (err instanceof BuildError) {
      console.error(`build error:\n${err.message}`);
      return 4;
    }
    if (err instanceof VectorFormatError) {
      console.error(err.message);
      return 3;
    }
    throw err;
  }
}

process.exitCode = main(process.argv.slice(2));
