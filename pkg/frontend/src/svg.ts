/**
 * Minimal deterministic SVG chart toolkit.
 *
 * Fixed styling, fixed tick algorithm, fixed number formatting: the same
 * data always renders to the identical byte sequence.
 */

export const PALETTE = [
  "#1f6f8b",
  "#d17a22",
  "#4a8f4e",
  "#a3423c",
  "#6b5b95",
  "#8a7a3b",
] as const;

export const FONT = "font-family=\"Helvetica, Arial, sans-serif\"";

export function fmt(v: number): string {
  if (!Number.isFinite(v)) throw new RangeError(`non-finite coordinate ${v}`);
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
}

/** Short label for tick values: enough digits, no noise. */
export function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e5 || a < 1e-3) return v.toExponential(1);
  const s = v.toPrecision(6);
  return s.includes(".") ? s.replace(/\.?0+$/, "") : s;
}

export interface Scale {
  (v: number): number;
  domain: [number, number];
}

export function linearScale(
  d0: number,
  d1: number,
  r0: number,
  r1: number,
): Scale {
  let lo = d0;
  let hi = d1;
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const k = (r1 - r0) / (hi - lo);
  const f = ((v: number) => r0 + (v - lo) * k) as Scale;
  f.domain = [lo, hi];
  return f;
}

/** Ticks at 1/2/5 multiples of a power of ten covering the domain. */
export function ticks(lo: number, hi: number, target = 5): number[] {
  if (lo === hi) return [lo];
  const span = hi - lo;
  const raw = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  let step = mag;
  for (const m of [1, 2, 5, 10]) {
    if (mag * m >= raw) {
      step = mag * m;
      break;
    }
  }
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

export function polyline(
  xs: readonly number[],
  ys: readonly number[],
  sx: Scale,
  sy: Scale,
): string {
  const parts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    parts.push(`${i === 0 ? "M" : "L"}${fmt(sx(xs[i]!))},${fmt(sy(ys[i]!))}`);
  }
  return parts.join(" ");
}

/** Closed region between a lower and an upper curve over the same xs. */
export function bandPath(
  xs: readonly number[],
  lower: readonly number[],
  upper: readonly number[],
  sx: Scale,
  sy: Scale,
): string {
  const parts: string[] = [];
  for (let i = 0; i < xs.length; i++) {
    parts.push(`${i === 0 ? "M" : "L"}${fmt(sx(xs[i]!))},${fmt(sy(upper[i]!))}`);
  }
  for (let i = xs.length - 1; i >= 0; i--) {
    parts.push(`L${fmt(sx(xs[i]!))},${fmt(sy(lower[i]!))}`);
  }
  return parts.join(" ") + " Z";
}

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function svgDocument(
  width: number,
  height: number,
  body: string[],
): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="#ffffff"/>`,
    ...body,
    "</svg>",
    "",
  ].join("\n");
}
