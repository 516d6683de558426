/** Attention fusion of NLI triplets with contextual token states.
 *
 * Per evidence pair, the 3-dim (contradiction, neutrality, entailment)
 * triplet projects to an attention query while the frozen token states
 * project to keys and values; the attention-pooled outputs of all pairs are
 * concatenated in sentence-rank order and passed through a tanh MLP with a
 * softmax head over the three veracity classes.
 *
 * Forward and backward are hand-written over Float64Arrays so gradients can
 * be validated against central finite differences at tight tolerances.
 */

import { gaussian, mulberry32 } from "./rng.js";

export interface NliSanConfig {
  tokenDim: number;
  attnDim: number;
  valueDim: number;
  hidden: number;
  pairs: number;
  classes?: number;
}

export const FULL_NLI_SAN = { hidden: 50, batchSize: 30, lr: 1e-4, epochs: 200 };

export interface PairInput {
  /** (contradiction, neutrality, entailment), length 3 */
  triplet: Float64Array;
  /** token states, each of length tokenDim; at least one per pair */
  tokens: Float64Array[];
}

export interface NamedParam {
  name: string;
  values: Float64Array;
  rows: number;
  cols: number;
}

const TRIPLET_DIM = 3;

function matRowDot(m: Float64Array, cols: number, row: number, v: Float64Array): number {
  let s = 0;
  const base = row * cols;
  for (let j = 0; j < cols; j++) s += m[base + j] * v[j];
  return s;
}

function softmax(xs: Float64Array): Float64Array {
  let max = -Infinity;
  for (const x of xs) if (x > max) max = x;
  const out = new Float64Array(xs.length);
  let sum = 0;
  for (let i = 0; i < xs.length; i++) {
    out[i] = Math.exp(xs[i] - max);
    sum += out[i];
  }
  for (let i = 0; i < xs.length; i++) out[i] /= sum;
  return out;
}

interface ForwardCache {
  input: PairInput[];
  queries: Float64Array[]; // per pair, attnDim
  keys: Float64Array[][]; // per pair, per token, attnDim
  values: Float64Array[][]; // per pair, per token, valueDim
  weights: Float64Array[]; // per pair, per token
  pooled: Float64Array[]; // per pair, valueDim
  z: Float64Array; // pairs * valueDim
  hPre: Float64Array;
  h: Float64Array;
  probs: Float64Array;
}

export class NliSanModel {
  readonly cfg: Required<NliSanConfig>;
  // projections: Wq (3 x a), Wk (d x a), Wv (d x v); head: W1 ((P*v) x H), W2 (H x C)
  Wq: Float64Array;
  bq: Float64Array;
  Wk: Float64Array;
  Wv: Float64Array;
  bv: Float64Array;
  W1: Float64Array;
  b1: Float64Array;
  W2: Float64Array;
  b2: Float64Array;

  constructor(cfg: NliSanConfig, seed = 7) {
    this.cfg = { classes: 3, ...cfg };
    const rand = mulberry32(seed);
    const init = (rows: number, cols: number) => {
      const out = new Float64Array(rows * cols);
      const scale = 1 / Math.sqrt(rows);
      for (let i = 0; i < out.length; i++) out[i] = gaussian(rand) * scale;
      return out;
    };
    const { tokenDim: d, attnDim: a, valueDim: v, hidden: h, pairs: p } = this.cfg;
    const c = this.cfg.classes;
    this.Wq = init(TRIPLET_DIM, a);
    this.bq = new Float64Array(a);
    // no key bias: a constant shift of every score cancels in the softmax
    this.Wk = init(d, a);
    this.Wv = init(d, v);
    this.bv = new Float64Array(v);
    this.W1 = init(p * v, h);
    this.b1 = new Float64Array(h);
    this.W2 = init(h, c);
    this.b2 = new Float64Array(c);
  }

  namedParams(): NamedParam[] {
    const { tokenDim: d, attnDim: a, valueDim: v, hidden: h, pairs: p } = this.cfg;
    const c = this.cfg.classes;
    return [
      { name: "Wq", values: this.Wq, rows: TRIPLET_DIM, cols: a },
      { name: "bq", values: this.bq, rows: 1, cols: a },
      { name: "Wk", values: this.Wk, rows: d, cols: a },
      { name: "Wv", values: this.Wv, rows: d, cols: v },
      { name: "bv", values: this.bv, rows: 1, cols: v },
      { name: "W1", values: this.W1, rows: p * v, cols: h },
      { name: "b1", values: this.b1, rows: 1, cols: h },
      { name: "W2", values: this.W2, rows: h, cols: c },
      { name: "b2", values: this.b2, rows: 1, cols: c },
    ];
  }

  private checkInput(input: PairInput[]): void {
    if (input.length !== this.cfg.pairs) {
      throw new Error(`expected ${this.cfg.pairs} pairs, got ${input.length}`);
    }
    for (const pair of input) {
      if (pair.triplet.length !== TRIPLET_DIM) {
        throw new Error(`triplet must have ${TRIPLET_DIM} components`);
      }
      if (pair.tokens.length === 0) throw new Error("each pair needs at least one token state");
      for (const t of pair.tokens) {
        if (t.length !== this.cfg.tokenDim) {
          throw new Error(`token state dim ${t.length}, expected ${this.cfg.tokenDim}`);
        }
      }
    }
  }

  forward(input: PairInput[]): ForwardCache {
    this.checkInput(input);
    const { attnDim: a, valueDim: v, hidden: hDim, pairs: p } = this.cfg;
    const c = this.cfg.classes;
    const scale = 1 / Math.sqrt(a);

    const queries: Float64Array[] = [];
    const keys: Float64Array[][] = [];
    const values: Float64Array[][] = [];
    const weights: Float64Array[] = [];
    const pooled: Float64Array[] = [];
    const z = new Float64Array(p * v);

    input.forEach((pair, pi) => {
      const q = new Float64Array(a);
      for (let j = 0; j < a; j++) {
        let s = this.bq[j];
        for (let i = 0; i < TRIPLET_DIM; i++) s += pair.triplet[i] * this.Wq[i * a + j];
        q[j] = s;
      }
      const K = pair.tokens.map((tok) => {
        const k = new Float64Array(a);
        for (let j = 0; j < a; j++) {
          let s = 0;
          for (let i = 0; i < tok.length; i++) s += tok[i] * this.Wk[i * a + j];
          k[j] = s;
        }
        return k;
      });
      const V = pair.tokens.map((tok) => {
        const val = new Float64Array(v);
        for (let j = 0; j < v; j++) {
          let s = this.bv[j];
          for (let i = 0; i < tok.length; i++) s += tok[i] * this.Wv[i * v + j];
          val[j] = s;
        }
        return val;
      });
      const scores = new Float64Array(K.length);
      for (let l = 0; l < K.length; l++) {
        let s = 0;
        for (let j = 0; j < a; j++) s += q[j] * K[l][j];
        scores[l] = s * scale;
      }
      const w = softmax(scores);
      const pool = new Float64Array(v);
      for (let l = 0; l < V.length; l++) {
        for (let j = 0; j < v; j++) pool[j] += w[l] * V[l][j];
      }
      queries.push(q);
      keys.push(K);
      values.push(V);
      weights.push(w);
      pooled.push(pool);
      z.set(pool, pi * v);
    });

    const hPre = new Float64Array(hDim);
    for (let j = 0; j < hDim; j++) {
      let s = this.b1[j];
      for (let i = 0; i < z.length; i++) s += z[i] * this.W1[i * hDim + j];
      hPre[j] = s;
    }
    const h = new Float64Array(hDim);
    for (let j = 0; j < hDim; j++) h[j] = Math.tanh(hPre[j]);
    const logits = new Float64Array(c);
    for (let j = 0; j < c; j++) {
      let s = this.b2[j];
      for (let i = 0; i < hDim; i++) s += h[i] * this.W2[i * c + j];
      logits[j] = s;
    }
    const probs = softmax(logits);
    return { input, queries, keys, values, weights, pooled, z, hPre, h, probs };
  }

  predictProbs(input: PairInput[]): Float64Array {
    return this.forward(input).probs;
  }

  loss(input: PairInput[], goldClass: number): number {
    const { probs } = this.forward(input);
    return -Math.log(Math.max(probs[goldClass], 1e-300));
  }

  /** Cross-entropy loss and analytic gradients, aligned with namedParams(). */
  lossAndGrads(input: PairInput[], goldClass: number): { loss: number; grads: Float64Array[] } {
    const cache = this.forward(input);
    const { attnDim: a, valueDim: v, hidden: hDim, pairs: p } = this.cfg;
    const c = this.cfg.classes;
    const scale = 1 / Math.sqrt(a);
    const loss = -Math.log(Math.max(cache.probs[goldClass], 1e-300));

    const gWq = new Float64Array(this.Wq.length);
    const gbq = new Float64Array(this.bq.length);
    const gWk = new Float64Array(this.Wk.length);
    const gWv = new Float64Array(this.Wv.length);
    const gbv = new Float64Array(this.bv.length);
    const gW1 = new Float64Array(this.W1.length);
    const gb1 = new Float64Array(this.b1.length);
    const gW2 = new Float64Array(this.W2.length);
    const gb2 = new Float64Array(this.b2.length);

    const dLogits = new Float64Array(c);
    for (let j = 0; j < c; j++) dLogits[j] = cache.probs[j] - (j === goldClass ? 1 : 0);

    const dH = new Float64Array(hDim);
    for (let i = 0; i < hDim; i++) {
      for (let j = 0; j < c; j++) {
        gW2[i * c + j] += cache.h[i] * dLogits[j];
        dH[i] += this.W2[i * c + j] * dLogits[j];
      }
    }
    for (let j = 0; j < c; j++) gb2[j] += dLogits[j];

    const dHPre = new Float64Array(hDim);
    for (let i = 0; i < hDim; i++) dHPre[i] = dH[i] * (1 - cache.h[i] * cache.h[i]);

    const dZ = new Float64Array(p * v);
    for (let i = 0; i < p * v; i++) {
      for (let j = 0; j < hDim; j++) {
        gW1[i * hDim + j] += cache.z[i] * dHPre[j];
        dZ[i] += this.W1[i * hDim + j] * dHPre[j];
      }
    }
    for (let j = 0; j < hDim; j++) gb1[j] += dHPre[j];

    cache.input.forEach((pair, pi) => {
      const K = cache.keys[pi];
      const V = cache.values[pi];
      const w = cache.weights[pi];
      const q = cache.queries[pi];
      const L = pair.tokens.length;
      const dPooled = dZ.subarray(pi * v, (pi + 1) * v);

      // values and the attention weights
      const dW = new Float64Array(L);
      for (let l = 0; l < L; l++) {
        let s = 0;
        for (let j = 0; j < v; j++) {
          s += dPooled[j] * V[l][j];
        }
        dW[l] = s;
        const tok = pair.tokens[l];
        for (let i = 0; i < tok.length; i++) {
          for (let j = 0; j < v; j++) gWv[i * v + j] += tok[i] * w[l] * dPooled[j];
        }
        for (let j = 0; j < v; j++) gbv[j] += w[l] * dPooled[j];
      }

      // softmax over attention scores
      let wDotDw = 0;
      for (let l = 0; l < L; l++) wDotDw += w[l] * dW[l];
      const dScores = new Float64Array(L);
      for (let l = 0; l < L; l++) dScores[l] = w[l] * (dW[l] - wDotDw);

      // scores -> query and keys
      const dQ = new Float64Array(a);
      for (let l = 0; l < L; l++) {
        const ds = dScores[l] * scale;
        for (let j = 0; j < a; j++) {
          dQ[j] += ds * K[l][j];
        }
        const tok = pair.tokens[l];
        for (let i = 0; i < tok.length; i++) {
          for (let j = 0; j < a; j++) gWk[i * a + j] += tok[i] * ds * q[j];
        }
      }
      for (let i = 0; i < TRIPLET_DIM; i++) {
        for (let j = 0; j < a; j++) gWq[i * a + j] += pair.triplet[i] * dQ[j];
      }
      for (let j = 0; j < a; j++) gbq[j] += dQ[j];
    });

    return { loss, grads: [gWq, gbq, gWk, gWv, gbv, gW1, gb1, gW2, gb2] };
  }
}

/** Central finite differences of the loss over every parameter component. */
export function finiteDifferenceGrads(
  model: NliSanModel,
  input: PairInput[],
  goldClass: number,
  eps = 1e-5,
): Float64Array[] {
  return model.namedParams().map(({ values }) => {
    const grad = new Float64Array(values.length);
    for (let i = 0; i < values.length; i++) {
      const original = values[i];
      values[i] = original + eps;
      const plus = model.loss(input, goldClass);
      values[i] = original - eps;
      const minus = model.loss(input, goldClass);
      values[i] = original;
      grad[i] = (plus - minus) / (2 * eps);
    }
    return grad;
  });
}

/** Worst per-tensor relative error: ||a - n|| / (||a|| + ||n||). */
export function maxRelativeError(analytic: Float64Array[], numeric: Float64Array[]): number {
  let worst = 0;
  for (let k = 0; k < analytic.length; k++) {
    let diff = 0;
    let na = 0;
    let nn = 0;
    for (let i = 0; i < analytic[k].length; i++) {
      const a = analytic[k][i];
      const n = numeric[k][i];
      diff += (a - n) * (a - n);
      na += a * a;
      nn += n * n;
    }
    const denom = Math.max(1e-12, Math.sqrt(na) + Math.sqrt(nn));
    worst = Math.max(worst, Math.sqrt(diff) / denom);
  }
  return worst;
}
