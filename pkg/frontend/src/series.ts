/** Pointwise aggregation of several (x, y) series into a mean/min/max band. */

export interface Series {
  label: string;
  x: number[];
  y: number[];
}

export interface Band {
  x: number[];
  mean: number[];
  min: number[];
  max: number[];
}

/**
 * Aggregate at every x that appears in at least one series; min and max are
 * exact selections from the inputs, the mean is the plain average of the
 * values present at that x.
 */
export function envelope(series: readonly Series[]): Band {
  const byX = new Map<number, number[]>();
  for (const s of series) {
    for (let i = 0; i < s.x.length; i++) {
      const x = s.x[i]!;
      const bucket = byX.get(x);
      if (bucket === undefined) {
        byX.set(x, [s.y[i]!]);
      } else {
        bucket.push(s.y[i]!);
      }
    }
  }
  const xs = [...byX.keys()].sort((a, b) => a - b);
  const band: Band = { x: xs, mean: [], min: [], max: [] };
  for (const x of xs) {
    const ys = byX.get(x)!;
    let lo = ys[0]!;
    let hi = ys[0]!;
    let sum = 0;
    for (const y of ys) {
      if (y < lo) lo = y;
      if (y > hi) hi = y;
      sum += y;
    }
    band.mean.push(sum / ys.length);
    band.min.push(lo);
    band.max.push(hi);
  }
  return band;
}
