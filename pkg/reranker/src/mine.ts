/**
 * Hard-negative group mining from a corpus file in the shared JSON schema.
 *
 * Each sentence forms one group: the cited paper's title+abstract is the
 * positive, and the n-1 highest-scoring other documents under a deterministic
 * token-hash bi-encoder are the negatives.
 */

import { fnv1a, mulberry32, tokenize } from "./text.js";

export interface CorpusRecord {
  category: string;
  link: string;
  paper_title: string;
  sentence_id: number;
  sentence: string;
  citation_text: string;
  cited_paper_id: string;
  cited_paper_title: string;
  cited_paper_abstract: string;
  cited_paper_authors: string[];
}

export interface TrainingGroup {
  sentence: string;
  positive: string;
  negatives: string[];
}

export function documentText(record: CorpusRecord): string {
  return `${record.cited_paper_title}\n${record.cited_paper_abstract}`.trim();
}

const tokenVectorCache = new Map<string, Float64Array>();

function tokenVector(token: string, dim: number): Float64Array {
  const key = `${dim}:${token}`;
  let vec = tokenVectorCache.get(key);
  if (!vec) {
    const rand = mulberry32(fnv1a(token));
    vec = Float64Array.from({ length: dim }, () => rand() * 2 - 1);
    tokenVectorCache.set(key, vec);
  }
  return vec;
}

export function hashEmbed(text: string, dim = 128): Float64Array {
  const out = new Float64Array(dim);
  const tokens = tokenize(text);
  if (!tokens.length) {
    out[0] = 1;
    return out;
  }
  for (const token of tokens) {
    const vec = tokenVector(token, dim);
    for (let i = 0; i < dim; i++) out[i] += vec[i];
  }
  let norm = 0;
  for (let i = 0; i < dim; i++) norm += out[i] * out[i];
  norm = Math.sqrt(norm);
  for (let i = 0; i < dim; i++) out[i] /= norm;
  return out;
}

export function dot(a: Float64Array, b: Float64Array): number {
  let acc = 0;
  for (let i = 0; i < a.length; i++) acc += a[i] * b[i];
  return acc;
}

export function mineGroups(records: CorpusRecord[], groupSize: number, embedDim = 128): TrainingGroup[] {
  if (groupSize < 2) throw new RangeError("group size must be at least 2");
  if (records.length < groupSize) {
    throw new RangeError(`corpus of ${records.length} records cannot form groups of ${groupSize}`);
  }
  const texts = records.map(documentText);
  const docVectors = texts.map((t) => hashEmbed(t, embedDim));

  return records.map((record, i) => {
    const positive = texts[i];
    const query = hashEmbed(record.sentence, embedDim);
    const scored: Array<{ j: number; score: number }> = [];
    for (let j = 0; j < records.length; j++) {
      if (j === i || texts[j] === positive) continue;
      scored.push({ j, score: dot(query, docVectors[j]) });
    }
    scored.sort((a, b) => b.score - a.score || a.j - b.j);
    const negatives = scored.slice(0, groupSize - 1).map(({ j }) => texts[j]);
    if (negatives.length < groupSize - 1) {
      throw new RangeError(
        `record ${record.link}#${record.sentence_id}: only ${negatives.length} distinct negatives available`,
      );
    }
    return { sentence: record.sentence, positive, negatives };
  });
}
