/**
 * The cross-encoder scorer: a deep residual network over joint pair features.
 *
 * Twelve residual tanh blocks by default, scoring a (sentence, document) pair
 * jointly, with hand-written forward/backward passes so training needs no
 * framework. Evaluation is a pure function of (checkpoint, inputs).
 */

import { createHash } from "node:crypto";

import { pairFeatures } from "./features.js";
import { mulberry32 } from "./text.js";

export const ARCHITECTURE = "residual-cross-encoder-12-layer";

export interface ModelConfig {
  architecture: string;
  featureDim: number;
  hidden: number;
  layers: number;
  seed: number;
}

export const DEFAULT_CONFIG: ModelConfig = {
  architecture: ARCHITECTURE,
  featureDim: 128,
  hidden: 32,
  layers: 12,
  seed: 1,
};

export interface Checkpoint {
  architecture: string;
  config: ModelConfig;
  weights: Record<string, number[]>;
  hyperparameters?: Record<string, unknown>;
  dataHash?: string;
}

interface ForwardCache {
  x: Float64Array;
  h0Pre: Float64Array;
  states: Float64Array[]; // h_0 .. h_L
  blockPre: Float64Array[]; // pre-activation per block
}

export class CrossEncoder {
  readonly config: ModelConfig;
  wIn: Float64Array; // hidden x featureDim
  bIn: Float64Array;
  blockW: Float64Array[]; // layers of hidden x hidden
  blockB: Float64Array[];
  vOut: Float64Array;
  cOut: Float64Array; // length 1

  constructor(config: Partial<ModelConfig> = {}) {
    this.config = { ...DEFAULT_CONFIG, ...config };
    const { featureDim, hidden, layers, seed } = this.config;
    const rand = mulberry32(seed);
    const init = (n: number, scale: number) =>
      Float64Array.from({ length: n }, () => (rand() * 2 - 1) * scale);
    this.wIn = init(hidden * featureDim, Math.sqrt(1 / featureDim));
    this.bIn = new Float64Array(hidden);
    // Small block init keeps the residual stream near identity at the start.
    this.blockW = Array.from({ length: layers }, () => init(hidden * hidden, 0.1 / Math.sqrt(hidden)));
    this.blockB = Array.from({ length: layers }, () => new Float64Array(hidden));
    this.vOut = init(hidden, Math.sqrt(1 / hidden));
    this.cOut = new Float64Array(1);
  }

  parameters(): Array<[string, Float64Array]> {
    const params: Array<[string, Float64Array]> = [
      ["wIn", this.wIn],
      ["bIn", this.bIn],
      ["vOut", this.vOut],
      ["cOut", this.cOut],
    ];
    this.blockW.forEach((w, i) => params.push([`blockW${i}`, w]));
    this.blockB.forEach((b, i) => params.push([`blockB${i}`, b]));
    return params;
  }

  forward(x: Float64Array): { score: number; cache: ForwardCache } {
    const { featureDim, hidden, layers } = this.config;
    const h0Pre = new Float64Array(hidden);
    for (let r = 0; r < hidden; r++) {
      let acc = this.bIn[r];
      const row = r * featureDim;
      for (let c = 0; c < featureDim; c++) acc += this.wIn[row + c] * x[c];
      h0Pre[r] = acc;
    }
    const states: Float64Array[] = [h0Pre.map(Math.tanh) as Float64Array];
    const blockPre: Float64Array[] = [];
    for (let l = 0; l < layers; l++) {
      const h = states[l];
      const pre = new Float64Array(hidden);
      const w = this.blockW[l];
      const b = this.blockB[l];
      for (let r = 0; r < hidden; r++) {
        let acc = b[r];
        const row = r * hidden;
        for (let c = 0; c < hidden; c++) acc += w[row + c] * h[c];
        pre[r] = acc;
      }
      blockPre.push(pre);
      const next = new Float64Array(hidden);
      for (let r = 0; r < hidden; r++) next[r] = h[r] + Math.tanh(pre[r]);
      states.push(next);
    }
    let score = this.cOut[0];
    const top = states[layers];
    for (let r = 0; r < hidden; r++) score += this.vOut[r] * top[r];
    return { score, cache: { x, h0Pre, states, blockPre } };
  }

  /** Accumulate dLoss/dParam into grads for a single pair; returns nothing. */
  backward(cache: ForwardCache, dScore: number, grads: Map<string, Float64Array>): void {
    const { featureDim, hidden, layers } = this.config;
    const top = cache.states[layers];
    const gV = grads.get("vOut")!;
    for (let r = 0; r < hidden; r++) gV[r] += dScore * top[r];
    grads.get("cOut")![0] += dScore;

    let dH = new Float64Array(hidden);
    for (let r = 0; r < hidden; r++) dH[r] = dScore * this.vOut[r];

    for (let l = layers - 1; l >= 0; l--) {
      const pre = cache.blockPre[l];
      const h = cache.states[l];
      const w = this.blockW[l];
      const gW = grads.get(`blockW${l}`)!;
      const gB = grads.get(`blockB${l}`)!;
      const dPre = new Float64Array(hidden);
      for (let r = 0; r < hidden; r++) {
        const t = Math.tanh(pre[r]);
        dPre[r] = dH[r] * (1 - t * t);
      }
      for (let r = 0; r < hidden; r++) {
        const row = r * hidden;
        gB[r] += dPre[r];
        for (let c = 0; c < hidden; c++) gW[row + c] += dPre[r] * h[c];
      }
      const dHPrev = new Float64Array(hidden);
      for (let c = 0; c < hidden; c++) {
        let acc = dH[c]; // residual path
        for (let r = 0; r < hidden; r++) acc += w[r * hidden + c] * dPre[r];
        dHPrev[c] = acc;
      }
      dH = dHPrev;
    }

    const gWIn = grads.get("wIn")!;
    const gBIn = grads.get("bIn")!;
    for (let r = 0; r < hidden; r++) {
      const t = Math.tanh(cache.h0Pre[r]);
      const dPre = dH[r] * (1 - t * t);
      gBIn[r] += dPre;
      const row = r * featureDim;
      for (let c = 0; c < featureDim; c++) gWIn[row + c] += dPre * cache.x[c];
    }
  }

  score(sentence: string, candidate: string): number {
    return this.forward(pairFeatures(sentence, candidate, this.config.featureDim)).score;
  }

  scoreBatch(sentence: string, candidates: string[]): number[] {
    return candidates.map((candidate) => this.score(sentence, candidate));
  }

  serialize(hyperparameters?: Record<string, unknown>, dataHash?: string): Checkpoint {
    const weights: Record<string, number[]> = {};
    for (const [name, values] of this.parameters()) weights[name] = Array.from(values);
    return {
      architecture: this.config.architecture,
      config: { ...this.config },
      weights,
      ...(hyperparameters ? { hyperparameters } : {}),
      ...(dataHash ? { dataHash } : {}),
    };
  }

  static deserialize(checkpoint: Checkpoint): CrossEncoder {
    const model = new CrossEncoder(checkpoint.config);
    for (const [name, values] of model.parameters()) {
      const stored = checkpoint.weights[name];
      if (!stored || stored.length !== values.length) {
        throw new Error(
          `checkpoint weight ${name} has ${stored?.length ?? 0} values, expected ${values.length}`,
        );
      }
      values.set(stored);
    }
    return model;
  }

  clone(): CrossEncoder {
    return CrossEncoder.deserialize(this.serialize());
  }
}

export function checkpointHash(checkpoint: Checkpoint): string {
  return createHash("sha256").update(JSON.stringify(checkpoint)).digest("hex");
}

export function zeroGrads(model: CrossEncoder): Map<string, Float64Array> {
  const grads = new Map<string, Float64Array>();
  for (const [name, values] of model.parameters()) grads.set(name, new Float64Array(values.length));
  return grads;
}
