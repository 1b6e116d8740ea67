/**
 * One figure builder per CSV kind.
 *
 * training  curve-v1    smoothed per-run returns, mean line + min/max band
 * benchmark trace-v1    overtaking traces: speed and lateral position panels
 * sweep     summary-v1  mean return vs density per agent, min/max band
 * activity  activity-v1 active-time fraction bars per option, grouped by axis
 */

import { basename } from "node:path";

import { MissingColumn, Table, num, requireColumns } from "./csv.js";
import { BandSpec, LineSpec, colour, renderPanel } from "./chart.js";
import { Band, Series, envelope } from "./series.js";
import { exponentialSmooth } from "./smooth.js";
import { FONT, esc, fmt, svgDocument } from "./svg.js";

export const WIDTH = 640;
export const PANEL_HEIGHT = 360;

export interface FigureInput {
  path: string;
  table: Table;
}

function label(input: FigureInput): string {
  return basename(input.path).replace(/\.csv$/, "");
}

// ------------------------------------------------------------- training

/** Per-run return curves from curve-v1 tables, one series per (file, run). */
export function trainingSeries(inputs: readonly FigureInput[]): Series[] {
  const series: Series[] = [];
  for (const input of inputs) {
    requireColumns(input.table, ["episode", "series", "return"]);
    const runs = new Map<number, { x: number[]; y: number[] }>();
    for (const row of input.table.rows) {
      const run = num(row, "series");
      let bucket = runs.get(run);
      if (bucket === undefined) {
        bucket = { x: [], y: [] };
        runs.set(run, bucket);
      }
      bucket.x.push(num(row, "episode"));
      bucket.y.push(num(row, "return"));
    }
    for (const run of [...runs.keys()].sort((a, b) => a - b)) {
      const { x, y } = runs.get(run)!;
      const order = x.map((_, i) => i).sort((a, b) => x[a]! - x[b]!);
      series.push({
        label: `${label(input)}/${run}`,
        x: order.map((i) => x[i]!),
        y: order.map((i) => y[i]!),
      });
    }
  }
  if (series.length === 0) {
    throw new MissingColumn("training input has no data rows");
  }
  return series;
}

/** Smooth every run, then aggregate pointwise into the plotted band. */
export function computeTrainingBand(
  inputs: readonly FigureInput[],
  alpha: number,
): Band {
  const smoothed = trainingSeries(inputs).map((s) => ({
    ...s,
    y: exponentialSmooth(s.y, alpha),
  }));
  return envelope(smoothed);
}

export function trainingFigure(
  inputs: readonly FigureInput[],
  alpha: number,
): string {
  const band = computeTrainingBand(inputs, alpha);
  const bands: BandSpec[] = [
    { x: band.x, lower: band.min, upper: band.max, color: colour(0) },
  ];
  const lines: LineSpec[] = [
    { label: "", x: band.x, y: band.mean, color: colour(0) },
  ];
  return svgDocument(WIDTH, PANEL_HEIGHT, [
    ...renderPanel(
      {
        title: `training return (smoothed, alpha=${alpha})`,
        xLabel: "episode",
        yLabel: "return",
        lines,
        bands,
      },
      0,
      0,
      WIDTH,
      PANEL_HEIGHT,
    ),
  ]);
}

// ------------------------------------------------------------ benchmark

export function benchmarkFigure(inputs: readonly FigureInput[]): string {
  const speed: LineSpec[] = [];
  const lateral: LineSpec[] = [];
  inputs.forEach((input, i) => {
    requireColumns(input.table, ["t", "v", "d"]);
    const t = input.table.rows.map((r) => num(r, "t"));
    speed.push({
      label: label(input),
      x: t,
      y: input.table.rows.map((r) => num(r, "v")),
      color: colour(i),
    });
    lateral.push({
      label: label(input),
      x: t,
      y: input.table.rows.map((r) => num(r, "d")),
      color: colour(i),
    });
  });
  return svgDocument(WIDTH, 2 * PANEL_HEIGHT, [
    ...renderPanel(
      {
        title: "overtaking: speed",
        xLabel: "step",
        yLabel: "v [m/s]",
        lines: speed,
        bands: [],
      },
      0,
      0,
      WIDTH,
      PANEL_HEIGHT,
    ),
    ...renderPanel(
      {
        title: "overtaking: lateral position",
        xLabel: "step",
        yLabel: "d [m]",
        lines: lateral,
        bands: [],
      },
      0,
      PANEL_HEIGHT,
      WIDTH,
      PANEL_HEIGHT,
    ),
  ]);
}

// ---------------------------------------------------------------- sweep

export function sweepFigure(inputs: readonly FigureInput[]): string {
  interface Point {
    density: number;
    mean: number;
    min: number;
    max: number;
  }
  const agents = new Map<string, Point[]>();
  for (const input of inputs) {
    requireColumns(input.table, [
      "agent",
      "density",
      "return_mean",
      "return_min",
      "return_max",
    ]);
    for (const row of input.table.rows) {
      const agent = row["agent"] ?? "";
      let points = agents.get(agent);
      if (points === undefined) {
        points = [];
        agents.set(agent, points);
      }
      points.push({
        density: num(row, "density"),
        mean: num(row, "return_mean"),
        min: num(row, "return_min"),
        max: num(row, "return_max"),
      });
    }
  }
  const lines: LineSpec[] = [];
  const bands: BandSpec[] = [];
  [...agents.keys()].sort().forEach((agent, i) => {
    const points = agents.get(agent)!.sort((a, b) => a.density - b.density);
    const x = points.map((p) => p.density);
    lines.push({
      label: agent,
      x,
      y: points.map((p) => p.mean),
      color: colour(i),
    });
    bands.push({
      x,
      lower: points.map((p) => p.min),
      upper: points.map((p) => p.max),
      color: colour(i),
    });
  });
  return svgDocument(WIDTH, PANEL_HEIGHT, [
    ...renderPanel(
      {
        title: "test return vs traffic density",
        xLabel: "density [vehicles/km/lane]",
        yLabel: "return",
        lines,
        bands,
      },
      0,
      0,
      WIDTH,
      PANEL_HEIGHT,
    ),
  ]);
}

// ------------------------------------------------------------- activity

export function activityFigure(inputs: readonly FigureInput[]): string {
  interface Bar {
    axis: string;
    option: string;
    fraction: number;
  }
  const bars: Bar[] = [];
  for (const input of inputs) {
    requireColumns(input.table, ["axis", "option", "fraction"]);
    for (const row of input.table.rows) {
      bars.push({
        axis: row["axis"] ?? "",
        option: row["option"] ?? "",
        fraction: num(row, "fraction"),
      });
    }
  }
  if (bars.length === 0) {
    throw new MissingColumn("activity input has no data rows");
  }
  const rowH = 22;
  const axes = [...new Set(bars.map((b) => b.axis))].sort();
  const height = 70 + bars.length * rowH + axes.length * 26;
  const plotX = 150;
  const plotW = WIDTH - plotX - 80;
  const body: string[] = [];
  body.push(
    `<text x="${fmt(WIDTH / 2)}" y="22" ${FONT} font-size="13" fill="#111111" text-anchor="middle">option active-time fractions</text>`,
  );
  let y = 48;
  axes.forEach((axis, ai) => {
    body.push(
      `<text x="${fmt(plotX)}" y="${fmt(y)}" ${FONT} font-size="12" fill="#111111" font-weight="bold">${esc(axis)}</text>`,
    );
    y += 10;
    for (const bar of bars.filter((b) => b.axis === axis)) {
      const w = Math.max(0, Math.min(1, bar.fraction)) * plotW;
      body.push(
        `<rect x="${fmt(plotX)}" y="${fmt(y)}" width="${fmt(w)}" height="${rowH - 6}" fill="${colour(ai)}" fill-opacity="0.8"/>`,
      );
      body.push(
        `<text x="${fmt(plotX - 8)}" y="${fmt(y + (rowH - 6) / 2)}" ${FONT} font-size="11" fill="#444444" text-anchor="end" dominant-baseline="middle">${esc(bar.option)}</text>`,
      );
      body.push(
        `<text x="${fmt(plotX + w + 6)}" y="${fmt(y + (rowH - 6) / 2)}" ${FONT} font-size="11" fill="#444444" dominant-baseline="middle">${esc(bar.fraction.toFixed(3))}</text>`,
      );
      y += rowH;
    }
    y += 16;
  });
  return svgDocument(WIDTH, height, body);
}
