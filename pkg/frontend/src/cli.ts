#!/usr/bin/env node
/**
 * Render experiment CSVs to an SVG figure.
 *
 *   optiondrive-plot --kind training --in run0.csv --in run1.csv --out fig.svg
 *
 * Kinds and their expected input schemas:
 *   training -> curve-v1, benchmark -> trace-v1,
 *   sweep -> summary-v1, activity -> activity-v1.
 */

import { writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import { MissingColumn, SchemaMismatch, readTable } from "./csv.js";
import {
  FigureInput,
  activityFigure,
  benchmarkFigure,
  sweepFigure,
  trainingFigure,
} from "./figures.js";

const SCHEMAS: Record<string, string> = {
  training: "curve-v1",
  benchmark: "trace-v1",
  sweep: "summary-v1",
  activity: "activity-v1",
};

export function render(
  kind: string,
  paths: readonly string[],
  alpha: number,
): string {
  const schema = SCHEMAS[kind];
  if (schema === undefined) {
    throw new RangeError(
      `unknown kind ${JSON.stringify(kind)}; expected one of ${Object.keys(SCHEMAS).join(", ")}`,
    );
  }
  if (paths.length === 0) {
    throw new RangeError("at least one --in file is required");
  }
  const inputs: FigureInput[] = paths.map((path) => ({
    path,
    table: readTable(path, schema),
  }));
  switch (kind) {
    case "training":
      return trainingFigure(inputs, alpha);
    case "benchmark":
      return benchmarkFigure(inputs);
    case "sweep":
      return sweepFigure(inputs);
    default:
      return activityFigure(inputs);
  }
}

export function main(argv: readonly string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: [...argv],
      options: {
        kind: { type: "string" },
        in: { type: "string", multiple: true },
        out: { type: "string" },
        alpha: { type: "string", default: "0.1" },
      },
      allowPositionals: false,
    });
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
  const { kind, in: inputs = [], out, alpha } = parsed.values;
  if (!kind || !out) {
    console.error(
      "usage: optiondrive-plot --kind {training|benchmark|sweep|activity} --in CSV [--in CSV ...] --out SVG [--alpha A]",
    );
    return 2;
  }
  const a = Number(alpha);
  if (!(a > 0 && a <= 1)) {
    console.error(`error: --alpha must be in (0, 1], got ${alpha}`);
    return 2;
  }
  try {
    writeFileSync(out, render(kind, inputs, a), "utf8");
  } catch (err) {
    if (
      err instanceof SchemaMismatch ||
      err instanceof MissingColumn ||
      err instanceof RangeError ||
      (err as NodeJS.ErrnoException).code === "ENOENT"
    ) {
      console.error(`error: ${(err as Error).message}`);
      return 2;
    }
    throw err;
  }
  console.log(`${kind} figure -> ${out}`);
  return 0;
}

const entry = process.argv[1];
if (entry !== undefined && import.meta.url === pathToFileURL(entry).href) {
  process.exit(main(process.argv.slice(2)));
}
