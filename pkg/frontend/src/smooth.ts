/** Exponential average smoothing: y'_t = a*y_t + (1-a)*y'_{t-1}. */

export function exponentialSmooth(
  values: readonly number[],
  alpha: number,
): number[] {
  if (!(alpha > 0 && alpha <= 1)) {
    throw new RangeError(`alpha must be in (0, 1], got ${alpha}`);
  }
  const out = new Array<number>(values.length);
  let prev = 0;
  for (let t = 0; t < values.length; t++) {
    const y = values[t]!;
    prev = t === 0 ? y : alpha * y + (1 - alpha) * prev; // seeded with the first sample
    out[t] = prev;
  }
  return out;
}
