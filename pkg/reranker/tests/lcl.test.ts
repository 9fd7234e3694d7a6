import { describe, expect, it } from "vitest";

import { lclGradient, lclLoss } from "../src/lcl.js";
import { mulberry32 } from "../src/text.js";

describe("lclLoss", () => {
  it("equals ln(n) when all scores are equal", () => {
    expect(lclLoss([0.5, 0.5, 0.5, 0.5], 0)).toBeCloseTo(Math.log(4), 6);
    expect(lclLoss([3, 3, 3, 3], 2)).toBeCloseTo(1.386294, 6);
    expect(lclLoss([1, 1], 1)).toBeCloseTo(Math.log(2), 9);
  });

  it("matches the hand-evaluated softmax on (2, 1, 0)", () => {
    expect(lclLoss([2, 1, 0], 0)).toBeCloseTo(0.407606, 6);
  });

  it("is non-negative and monotone decreasing in the positive score", () => {
    const rand = mulberry32(5);
    let previous = Infinity;
    for (const bump of [0, 1, 2, 4, 8, 16]) {
      const loss = lclLoss([1 + bump, 1, 1], 0);
      expect(loss).toBeGreaterThanOrEqual(0);
      expect(loss).toBeLessThan(previous);
      previous = loss;
    }
    for (let i = 0; i < 50; i++) {
      const scores = Array.from({ length: 2 + Math.floor(rand() * 6) }, () => rand() * 10 - 5);
      expect(lclLoss(scores, 0)).toBeGreaterThanOrEqual(0);
    }
  });

  it("approaches 0 as the positive dominates", () => {
    expect(lclLoss([60, 0, 0], 0)).toBeLessThan(1e-9);
  });

  it("is invariant under adding a constant to every score", () => {
    const rand = mulberry32(11);
    for (let i = 0; i < 50; i++) {
      const scores = Array.from({ length: 5 }, () => rand() * 6 - 3);
      const shift = rand() * 100 - 50;
      const shifted = scores.map((s) => s + shift);
      expect(Math.abs(lclLoss(shifted, 2) - lclLoss(scores, 2))).toBeLessThan(1e-9);
    }
  });

  it("rejects out-of-range positive indices", () => {
    expect(() => lclLoss([1, 2], 2)).toThrow(RangeError);
    expect(() => lclLoss([1, 2], -1)).toThrow(RangeError);
    expect(() => lclGradient([1, 2], 5)).toThrow(RangeError);
  });
});

describe("lclGradient", () => {
  it("matches central finite differences on 100 random score vectors", () => {
    const rand = mulberry32(99);
    const eps = 1e-5;
    for (let trial = 0; trial < 100; trial++) {
      const n = 2 + Math.floor(rand() * 7);
      const scores = Array.from({ length: n }, () => rand() * 8 - 4);
      const positive = Math.floor(rand() * n);
      const grad = lclGradient(scores, positive);
      for (let i = 0; i < n; i++) {
        const up = scores.slice();
        const down = scores.slice();
        up[i] += eps;
        down[i] -= eps;
        const numeric = (lclLoss(up, positive) - lclLoss(down, positive)) / (2 * eps);
        expect(Math.abs(grad[i] - numeric)).toBeLessThan(1e-4);
      }
    }
  });

  it("sums to zero (softmax minus one-hot)", () => {
    const grad = lclGradient([1.5, -0.5, 0.25], 1);
    const total = grad.reduce((a, b) => a + b, 0);
    expect(Math.abs(total)).toBeLessThan(1e-12);
    expect(grad[1]).toBeLessThan(0);
  });
});
