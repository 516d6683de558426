/** Encoder-pair veracity classification: a trainable softmax head over the
 * frozen encoder's pooled representation of rumour/evidence inputs. */

import { AdamW } from "./adamw.js";
import { FrozenHashEncoder, SEP_TOKEN } from "./encoder.js";
import { makeFolds } from "./dataset.js";
import { mulberry32, seededShuffle } from "./rng.js";
import { DatasetEntry, LABELS, Label, PredictionRecord, Scenario } from "./types.js";

export interface TrainingConfig {
  lr: number;
  epochs: number;
  batchSize: number;
  beta1: number;
  beta2: number;
  weightDecay: number;
  seed: number;
  shuffle: boolean;
}

/** Production-scale settings for the encoder-pair classifier. */
export const FULL_PAIR_CONFIG: TrainingConfig = {
  lr: 3e-5, epochs: 25, batchSize: 20,
  beta1: 0.9, beta2: 0.999, weightDecay: 0.01, seed: 7, shuffle: true,
};

/** Desk-scale settings: frozen encoder, few epochs, fast learning rate. */
export const TOY_PAIR_CONFIG: TrainingConfig = {
  lr: 0.1, epochs: 3, batchSize: 10,
  beta1: 0.9, beta2: 0.999, weightDecay: 0.01, seed: 7, shuffle: false,
};

export interface PairSample {
  text: string;
  label: Label;
}

/** Scenario inputs for one thread: one text per evidence pair, or a single
 * rumour-only text. Rumour and evidence concatenate around the separator. */
export function buildPairInputs(entry: DatasetEntry, scenario: Scenario): string[] {
  const rumour = entry.source.text;
  if (scenario === "rumour") return [rumour];
  const sentences = entry.sentences.map((s) => s.text);
  if (scenario === "evidence") return sentences;
  if (!rumour.trim()) throw new Error(`thread ${entry.thread_id} has an empty rumour text`);
  return sentences.map((s) => {
    if (!s.trim()) throw new Error(`thread ${entry.thread_id} has an empty evidence sentence`);
    return `${rumour} ${SEP_TOKEN} ${s}`;
  });
}

export class SoftmaxPairClassifier {
  private readonly weights: Float64Array; // dim x classes
  private readonly bias: Float64Array;
  private trained = false;

  constructor(
    private readonly encoder: FrozenHashEncoder,
    private readonly cfg: TrainingConfig,
  ) {
    this.weights = new Float64Array(encoder.dim * LABELS.length);
    this.bias = new Float64Array(LABELS.length);
  }

  private logits(features: Float64Array): Float64Array {
    const c = LABELS.length;
    const out = new Float64Array(c);
    for (let j = 0; j < c; j++) {
      let s = this.bias[j];
      for (let i = 0; i < features.length; i++) s += features[i] * this.weights[i * c + j];
      out[j] = s;
    }
    return out;
  }

  private probs(features: Float64Array): Float64Array {
    const logits = this.logits(features);
    let max = -Infinity;
    for (const l of logits) if (l > max) max = l;
    let sum = 0;
    const out = new Float64Array(logits.length);
    for (let j = 0; j < logits.length; j++) {
      out[j] = Math.exp(logits[j] - max);
      sum += out[j];
    }
    for (let j = 0; j < logits.length; j++) out[j] /= sum;
    return out;
  }

  /** Train with cross-entropy; returns the mean loss per epoch. */
  train(samples: PairSample[]): number[] {
    if (samples.length === 0) throw new Error("no training samples");
    const c = LABELS.length;
    const features = samples.map((s) => this.encoder.pooled(s.text));
    const gold = samples.map((s) => LABELS.indexOf(s.label));
    const optimizer = new AdamW([this.weights, this.bias], {
      lr: this.cfg.lr, beta1: this.cfg.beta1, beta2: this.cfg.beta2,
      weightDecay: this.cfg.weightDecay,
    });
    const rand = mulberry32(this.cfg.seed);
    const epochLosses: number[] = [];
    for (let epoch = 0; epoch < this.cfg.epochs; epoch++) {
      const order = this.cfg.shuffle
        ? seededShuffle([...features.keys()], rand)
        : [...features.keys()];
      let total = 0;
      for (let start = 0; start < order.length; start += this.cfg.batchSize) {
        const batch = order.slice(start, start + this.cfg.batchSize);
        const gW = new Float64Array(this.weights.length);
        const gB = new Float64Array(this.bias.length);
        for (const idx of batch) {
          const f = features[idx];
          const p = this.probs(f);
          total += -Math.log(Math.max(p[gold[idx]], 1e-300));
          for (let j = 0; j < c; j++) {
            const d = (p[j] - (j === gold[idx] ? 1 : 0)) / batch.length;
            gB[j] += d;
            for (let i = 0; i < f.length; i++) gW[i * c + j] += f[i] * d;
          }
        }
        optimizer.step([gW, gB]);
      }
      epochLosses.push(total / samples.length);
    }
    this.trained = true;
    return epochLosses;
  }

  predict(text: string): Label {
    if (!this.trained) throw new Error("classifier has not been trained");
    const p = this.probs(this.encoder.pooled(text));
    let best = 0;
    for (let j = 1; j < p.length; j++) if (p[j] > p[best]) best = j;
    return LABELS[best];
  }

  trainAccuracy(samples: PairSample[]): number {
    const correct = samples.filter((s) => this.predict(s.text) === s.label).length;
    return correct / samples.length;
  }
}

export interface FoldRun {
  heldOutEvent: string;
  epochLosses: number[];
  records: PredictionRecord[];
}

/** Train one classifier per fold on the training split only and emit
 * per-(rumour, sentence) prediction records for the held-out event. */
export function trainAndPredictFolds(
  entries: DatasetEntry[],
  scenario: Scenario,
  encoder: FrozenHashEncoder,
  cfg: TrainingConfig,
): FoldRun[] {
  return makeFolds(entries).map((fold) => {
    const samples: PairSample[] = fold.train.flatMap((entry) =>
      buildPairInputs(entry, scenario).map((text) => ({ text, label: entry.label })),
    );
    const classifier = new SoftmaxPairClassifier(encoder, cfg);
    const epochLosses = classifier.train(samples);
    const records: PredictionRecord[] = fold.test.flatMap((entry) =>
      buildPairInputs(entry, scenario).map((text, pairIndex) => ({
        thread_id: entry.thread_id,
        pair_index: pairIndex,
        predicted_label: classifier.predict(text),
        fold: fold.heldOutEvent,
      })),
    );
    return { heldOutEvent: fold.heldOutEvent, epochLosses, records };
  });
}
