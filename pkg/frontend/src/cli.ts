#!/usr/bin/env node
/**
 * render --kind tracking|error-integrals|boundary-surface --in PATH --out PATH [--log-y]
 *
 * Exit codes: 0 success, 1 render error (e.g. a missing/misnamed CSV
 * column, reported by name), 2 usage error.
 */

import { fileURLToPath } from "url";

import { FigureKind, FigureSpec, render } from "./figures.js";

const KINDS: FigureKind[] = ["tracking", "error-integrals", "boundary-surface"];

function usage(): string {
  return [
    "usage: outreg-render render --kind KIND --in CSV [--in CSV ...] --out SVG [--log-y]",
    `  KIND: ${KINDS.join(" | ")}`,
  ].join("\n");
}

export function parseArgs(argv: string[]): FigureSpec {
  if (argv[0] !== "render") {
    throw new UsageError(`unknown command '${argv[0] ?? ""}'`);
  }
  let kind: string | undefined;
  const inputs: string[] = [];
  let output: string | undefined;
  let logY = false;
  for (let i = 1; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--kind") kind = argv[++i];
    else if (a === "--in") inputs.push(argv[++i]);
    else if (a === "--out") output = argv[++i];
    else if (a === "--log-y") logY = true;
    else throw new UsageError(`unknown argument '${a}'`);
  }
  if (!kind || !KINDS.includes(kind as FigureKind)) {
    throw new UsageError(`--kind must be one of ${KINDS.join(", ")}`);
  }
  if (inputs.length === 0 || inputs.some((p) => !p)) throw new UsageError("--in CSV is required");
  if (!output) throw new UsageError("--out SVG is required");
  return { kind: kind as FigureKind, inputs, output, logY };
}

export class UsageError extends Error {}

export function main(argv: string[]): number {
  let spec: FigureSpec;
  try {
    spec = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    console.error(usage());
    return 2;
  }
  try {
    render(spec);
  } catch (err) {
    console.error((err as Error).message);
    return 1;
  }
  console.log(`wrote ${spec.output}`);
  return 0;
}

if (process.argv[1] && fileURLToPath(import.meta.url) === process.argv[1]) {
  process.exit(main(process.argv.slice(2)));
}
