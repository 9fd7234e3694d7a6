import { describe, expect, it } from "vitest";

import { CrossEncoder } from "../src/model.js";
import { TrainingGroup } from "../src/mine.js";
import { evaluate, splitHoldout, train } from "../src/train.js";
import { mulberry32 } from "../src/text.js";

/**
 * Synthetic keyword corpus: the sentence and its positive document share a
 * keyword; negatives share only filler vocabulary. A scorer that learns to
 * reward keyword overlap separates positives from negatives.
 */
function keywordGroups(count: number, groupSize = 6, seed = 21): TrainingGroup[] {
  const rand = mulberry32(seed);
  const fillers = ["study", "method", "results", "analysis", "data", "model", "systems"];
  const pick = () => fillers[Math.floor(rand() * fillers.length)];
  const groups: TrainingGroup[] = [];
  for (let i = 0; i < count; i++) {
    const keyword = `keyword${i % 24}`;
    const sentence = `the ${pick()} builds on ${keyword} with further ${pick()}`;
    const positive = `paper on ${keyword}: a ${pick()} of ${pick()} and ${pick()}`;
    const negatives = Array.from({ length: groupSize - 1 }, (_, j) => {
      const wrong = `keyword${(i + j + 1) % 24}x`;
      return `paper on ${wrong}: a ${pick()} of ${pick()} and ${pick()}`;
    });
    groups.push({ sentence, positive, negatives });
  }
  return groups;
}

const SMOKE_CONFIG = { featureDim: 96, hidden: 16, layers: 12, seed: 2 };
// The defaults (2e-5, 2 epochs) target warm-started checkpoints; a fresh
// random init on a small synthetic corpus needs a stronger schedule.
const SMOKE_HP = { learningRate: 0.01, epochs: 8, groupSize: 6, batchSize: 4, seed: 13, holdoutFraction: 0.2 };

describe("train", () => {
  it("improves held-out MRR and reduces held-out loss on the keyword corpus", () => {
    const groups = keywordGroups(100);
    const result = train(groups, SMOKE_HP, SMOKE_CONFIG);
    expect(result.diverged).toBe(false);
    expect(result.holdoutAfter.mrr).toBeGreaterThan(result.holdoutBefore.mrr);
    expect(result.holdoutAfter.meanLoss).toBeLessThan(result.holdoutBefore.meanLoss);
  });

  it("training loss does not increase over the first epoch on average", () => {
    const groups = keywordGroups(60);
    const result = train(groups, { ...SMOKE_HP, epochs: 2 }, SMOKE_CONFIG);
    const { train: trainSlice } = splitHoldout(groups, { ...SMOKE_HP, epochs: 2 } as any);
    const untrained = evaluate(new CrossEncoder(SMOKE_CONFIG), trainSlice);
    expect(result.history[0].meanLoss).toBeLessThanOrEqual(untrained.meanLoss + 1e-9);
  });

  it("zero epochs leaves the base model untouched", () => {
    const groups = keywordGroups(20);
    const result = train(groups, { ...SMOKE_HP, epochs: 0 }, SMOKE_CONFIG);
    const base = new CrossEncoder(SMOKE_CONFIG);
    for (const group of groups.slice(0, 5)) {
      expect(result.model.score(group.sentence, group.positive)).toBe(
        base.score(group.sentence, group.positive),
      );
    }
    expect(result.history).toHaveLength(0);
  });

  it("records hyperparameters and the data hash in the checkpoint", () => {
    const groups = keywordGroups(20);
    const result = train(groups, { ...SMOKE_HP, epochs: 1 }, SMOKE_CONFIG);
    expect(result.checkpoint.hyperparameters).toMatchObject({ learningRate: 0.01, epochs: 1 });
    expect(result.checkpoint.dataHash).toMatch(/^[0-9a-f]{64}$/);
    expect(result.checkpointHash).toMatch(/^[0-9a-f]{64}$/);
  });

  it("aborts on divergence and keeps the last finite checkpoint", () => {
    const groups = keywordGroups(20);
    // A learning rate at the double-precision ceiling overflows the scores
    // (Adam updates are lr-sized regardless of gradient magnitude).
    const result = train(groups, { ...SMOKE_HP, learningRate: 1e308, epochs: 5 }, SMOKE_CONFIG);
    expect(result.diverged).toBe(true);
    for (const group of groups.slice(0, 3)) {
      expect(Number.isFinite(result.model.score(group.sentence, group.positive))).toBe(true);
    }
    expect(result.history.length).toBeLessThan(5);
  });

  it("is deterministic for a fixed seed", () => {
    const groups = keywordGroups(30);
    const a = train(groups, { ...SMOKE_HP, epochs: 2 }, SMOKE_CONFIG);
    const b = train(groups, { ...SMOKE_HP, epochs: 2 }, SMOKE_CONFIG);
    expect(a.checkpointHash).toBe(b.checkpointHash);
  });
});
