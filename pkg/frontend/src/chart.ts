/** Axis/panel assembly shared by the figure kinds. */

import {
  FONT,
  PALETTE,
  Scale,
  bandPath,
  esc,
  fmt,
  linearScale,
  polyline,
  tickLabel,
  ticks,
} from "./svg.js";

export interface LineSpec {
  label: string;
  x: number[];
  y: number[];
  color: string;
}

export interface BandSpec {
  x: number[];
  lower: number[];
  upper: number[];
  color: string;
}

export interface PanelSpec {
  title?: string;
  xLabel: string;
  yLabel: string;
  lines: LineSpec[];
  bands: BandSpec[];
  /** Include y = 0 in the axis range even when the data stays away from it. */
  zeroLine?: boolean;
}

export const MARGIN = { top: 34, right: 16, bottom: 42, left: 62 } as const;

function extent(values: Iterable<number>): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo > hi) throw new RangeError("empty extent");
  return [lo, hi];
}

function* panelYs(spec: PanelSpec): Iterable<number> {
  for (const b of spec.bands) {
    yield* b.lower;
    yield* b.upper;
  }
  for (const l of spec.lines) yield* l.y;
  if (spec.zeroLine) yield 0;
}

function* panelXs(spec: PanelSpec): Iterable<number> {
  for (const b of spec.bands) yield* b.x;
  for (const l of spec.lines) yield* l.x;
}

export function colour(i: number): string {
  return PALETTE[i % PALETTE.length]!;
}

/** Render one panel into the rectangle (x0, y0, width, height). */
export function renderPanel(
  spec: PanelSpec,
  x0: number,
  y0: number,
  width: number,
  height: number,
): string[] {
  const plotX = x0 + MARGIN.left;
  const plotY = y0 + MARGIN.top;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;
  const [xLo, xHi] = extent(panelXs(spec));
  let [yLo, yHi] = extent(panelYs(spec));
  if (yLo === yHi) {
    yLo -= 1;
    yHi += 1;
  } else {
    const pad = 0.05 * (yHi - yLo);
    yLo -= pad;
    yHi += pad;
  }
  const sx = linearScale(xLo, xHi, plotX, plotX + plotW);
  const sy = linearScale(yLo, yHi, plotY + plotH, plotY);
  const out: string[] = [];

  for (const tv of ticks(sy.domain[0], sy.domain[1])) {
    const y = fmt(sy(tv));
    out.push(
      `<line x1="${fmt(plotX)}" y1="${y}" x2="${fmt(plotX + plotW)}" y2="${y}" stroke="#e0e0e0" stroke-width="1"/>`,
    );
    out.push(
      `<text x="${fmt(plotX - 6)}" y="${y}" ${FONT} font-size="11" fill="#444444" text-anchor="end" dominant-baseline="middle">${esc(tickLabel(tv))}</text>`,
    );
  }
  for (const tv of ticks(sx.domain[0], sx.domain[1])) {
    const x = fmt(sx(tv));
    out.push(
      `<line x1="${x}" y1="${fmt(plotY + plotH)}" x2="${x}" y2="${fmt(plotY + plotH + 4)}" stroke="#444444" stroke-width="1"/>`,
    );
    out.push(
      `<text x="${x}" y="${fmt(plotY + plotH + 16)}" ${FONT} font-size="11" fill="#444444" text-anchor="middle">${esc(tickLabel(tv))}</text>`,
    );
  }

  for (const band of spec.bands) {
    out.push(
      `<path d="${bandPath(band.x, band.lower, band.upper, sx, sy)}" fill="${band.color}" fill-opacity="0.18" stroke="none"/>`,
    );
  }
  for (const line of spec.lines) {
    out.push(
      `<path d="${polyline(line.x, line.y, sx, sy)}" fill="none" stroke="${line.color}" stroke-width="1.6"/>`,
    );
  }

  out.push(
    `<rect x="${fmt(plotX)}" y="${fmt(plotY)}" width="${fmt(plotW)}" height="${fmt(plotH)}" fill="none" stroke="#444444" stroke-width="1"/>`,
  );
  if (spec.title) {
    out.push(
      `<text x="${fmt(plotX + plotW / 2)}" y="${fmt(y0 + 18)}" ${FONT} font-size="13" fill="#111111" text-anchor="middle">${esc(spec.title)}</text>`,
    );
  }
  out.push(
    `<text x="${fmt(plotX + plotW / 2)}" y="${fmt(plotY + plotH + 34)}" ${FONT} font-size="12" fill="#111111" text-anchor="middle">${esc(spec.xLabel)}</text>`,
  );
  out.push(
    `<text x="${fmt(x0 + 16)}" y="${fmt(plotY + plotH / 2)}" ${FONT} font-size="12" fill="#111111" text-anchor="middle" transform="rotate(-90 ${fmt(x0 + 16)} ${fmt(plotY + plotH / 2)})">${esc(spec.yLabel)}</text>`,
  );

  const legendEntries = spec.lines.filter((l) => l.label.length > 0);
  if (legendEntries.length > 1) {
    let ly = plotY + 8;
    for (const entry of legendEntries) {
      const lx = plotX + plotW - 130;
      out.push(
        `<line x1="${fmt(lx)}" y1="${fmt(ly)}" x2="${fmt(lx + 18)}" y2="${fmt(ly)}" stroke="${entry.color}" stroke-width="1.6"/>`,
      );
      out.push(
        `<text x="${fmt(lx + 24)}" y="${fmt(ly)}" ${FONT} font-size="11" fill="#111111" dominant-baseline="middle">${esc(entry.label)}</text>`,
      );
      ly += 15;
    }
  }
  return out;
}
