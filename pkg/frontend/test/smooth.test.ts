import { describe, expect, it } from "vitest";

import { exponentialSmooth } from "../src/smooth.js";

describe("exponentialSmooth", () => {
  it("matches a hand-computed alpha=0.1 sequence to 1e-12", () => {
    // y' seeded with the first sample, then y'_t = 0.1*y_t + 0.9*y'_{t-1}:
    //   t=0: 10
    //   t=1: 0.1*20 + 0.9*10        = 11
    //   t=2: 0.1*-5 + 0.9*11        = 9.4
    //   t=3: 0.1*0  + 0.9*9.4       = 8.46
    //   t=4: 0.1*12.5 + 0.9*8.46    = 8.864
    const got = exponentialSmooth([10, 20, -5, 0, 12.5], 0.1);
    const want = [10, 11, 9.4, 8.46, 8.864];
    expect(got.length).toBe(want.length);
    for (let i = 0; i < want.length; i++) {
      expect(Math.abs(got[i]! - want[i]!)).toBeLessThanOrEqual(1e-12);
    }
  });

  it("recurrence holds exactly for a long random-ish sequence", () => {
    const ys: number[] = [];
    let state = 1;
    for (let i = 0; i < 500; i++) {
      state = (state * 48271) % 2147483647; // Lehmer stream, deterministic
      ys.push((state % 1000) / 10 - 50);
    }
    const alpha = 0.1;
    const got = exponentialSmooth(ys, alpha);
    let prev = ys[0]!;
    expect(got[0]).toBe(prev);
    for (let t = 1; t < ys.length; t++) {
      prev = alpha * ys[t]! + (1 - alpha) * prev;
      expect(Math.abs(got[t]! - prev)).toBeLessThanOrEqual(1e-12);
    }
  });

  it("alpha=1 is the identity", () => {
    const ys = [3, -1, 4, 1, -5, 9.25];
    expect(exponentialSmooth(ys, 1)).toEqual(ys);
  });

  it("constant input stays constant", () => {
    expect(exponentialSmooth([7, 7, 7, 7], 0.1)).toEqual([7, 7, 7, 7]);
  });

  it("rejects alpha outside (0, 1]", () => {
    expect(() => exponentialSmooth([1], 0)).toThrow(RangeError);
    expect(() => exponentialSmooth([1], 1.5)).toThrow(RangeError);
    expect(() => exponentialSmooth([1], -0.1)).toThrow(RangeError);
  });

  it("empty input gives empty output", () => {
    expect(exponentialSmooth([], 0.1)).toEqual([]);
  });
});
