/**
 * Joint (sentence, document) feature map for the cross-encoder.
 *
 * Tokens the pair shares hash into the first half of the bucket section,
 * document-only tokens into the second half, and four trailing slots carry
 * scalar overlap statistics. The bucket section is L2-normalized so feature
 * magnitude does not scale with document length.
 */

import { fnv1a, tokenize } from "./text.js";

export const SCALAR_SLOTS = 4;

export function pairFeatures(sentence: string, candidate: string, dim: number): Float64Array {
  if (dim <= SCALAR_SLOTS + 2) throw new RangeError(`feature dim ${dim} too small`);
  const buckets = dim - SCALAR_SLOTS;
  const overlapBuckets = Math.floor(buckets / 2);
  const x = new Float64Array(dim);

  const sentenceTokens = tokenize(sentence);
  const candidateTokens = tokenize(candidate);
  const sentenceSet = new Set(sentenceTokens);

  let overlap = 0;
  for (const token of candidateTokens) {
    if (sentenceSet.has(token)) {
      x[fnv1a(token) % overlapBuckets] += 1;
      overlap += 1;
    } else {
      x[overlapBuckets + (fnv1a(token) % (buckets - overlapBuckets))] += 1;
    }
  }

  let norm = 0;
  for (let i = 0; i < buckets; i++) norm += x[i] * x[i];
  if (norm > 0) {
    norm = Math.sqrt(norm);
    for (let i = 0; i < buckets; i++) x[i] /= norm;
  }

  const union = new Set([...sentenceSet, ...candidateTokens]).size;
  x[buckets] = candidateTokens.length ? overlap / candidateTokens.length : 0;
  x[buckets + 1] = union ? (overlap > 0 ? overlap / union : 0) : 0;
  x[buckets + 2] = Math.log(1 + candidateTokens.length) / 10;
  x[buckets + 3] = 1; // bias
  return x;
}
