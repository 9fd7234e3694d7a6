/**
 * Localized contrastive loss over one group of candidate scores.
 *
 * For a group holding one relevant document and n-1 mined negatives, the loss
 * is the negative log softmax probability of the relevant document:
 *
 *   L = -log( exp(s_pos) / sum_j exp(s_j) ) = logSumExp(s) - s_pos
 *
 * computed with the max-shifted log-sum-exp so large scores never overflow.
 */

export function logSumExp(values: number[]): number {
  let max = -Infinity;
  for (const v of values) if (v > max) max = v;
  if (!Number.isFinite(max)) return max;
  let sum = 0;
  for (const v of values) sum += Math.exp(v - max);
  return max + Math.log(sum);
}

function checkIndex(scores: number[], positiveIndex: number): void {
  if (!Number.isInteger(positiveIndex) || positiveIndex < 0 || positiveIndex >= scores.length) {
    throw new RangeError(`positive index ${positiveIndex} out of range for ${scores.length} scores`);
  }
}

export function lclLoss(scores: number[], positiveIndex: number): number {
  checkIndex(scores, positiveIndex);
  return logSumExp(scores) - scores[positiveIndex];
}

/** dL/ds = softmax(s) - onehot(positive). */
export function lclGradient(scores: number[], positiveIndex: number): number[] {
  checkIndex(scores, positiveIndex);
  const lse = logSumExp(scores);
  const grad = scores.map((s) => Math.exp(s - lse));
  grad[positiveIndex] -= 1;
  return grad;
}
