/** Dataset-level training loop for the NLI-SAN fusion model: one training
 * example per thread (all of its evidence pairs fused), one prediction
 * record per held-out thread. */

import { AdamW } from "./adamw.js";
import { makeFolds } from "./dataset.js";
import { FrozenHashEncoder, SEP_TOKEN } from "./encoder.js";
import { NliProvider, TripletCache, tripletKey } from "./nli.js";
import { NliSanModel, PairInput } from "./nliSan.js";
import { mulberry32, seededShuffle } from "./rng.js";
import { DatasetEntry, LABELS, PredictionRecord } from "./types.js";
import { TrainingConfig } from "./pairClassifier.js";

export interface NliSanRunConfig extends TrainingConfig {
  attnDim: number;
  valueDim: number;
  hidden: number;
}

export const TOY_NLI_SAN_CONFIG: NliSanRunConfig = {
  lr: 0.02, epochs: 12, batchSize: 4, beta1: 0.9, beta2: 0.999,
  weightDecay: 0.01, seed: 11, shuffle: true, attnDim: 8, valueDim: 6, hidden: 16,
};

export const FULL_NLI_SAN_CONFIG: NliSanRunConfig = {
  lr: 1e-4, epochs: 200, batchSize: 30, beta1: 0.9, beta2: 0.999,
  weightDecay: 0.01, seed: 11, shuffle: true, attnDim: 64, valueDim: 64, hidden: 50,
};

export function entryPairInputs(
  entry: DatasetEntry,
  encoder: FrozenHashEncoder,
  provider: NliProvider,
  cache: TripletCache,
): PairInput[] {
  return entry.sentences.map((sentence, index) => {
    const t = cache.getOrCompute(tripletKey(entry.thread_id, index), () =>
      provider.triplet(entry.source.text, sentence.text),
    );
    const tokens = encoder.tokenStates(`${entry.source.text} ${SEP_TOKEN} ${sentence.text}`);
    return {
      triplet: Float64Array.from([t.contradiction, t.neutrality, t.entailment]),
      tokens: tokens.length ? tokens : [new Float64Array(encoder.dim)],
    };
  });
}

export interface NliSanFoldRun {
  heldOutEvent: string;
  epochLosses: number[];
  records: PredictionRecord[];
}

export function trainNliSanFolds(
  entries: DatasetEntry[],
  encoder: FrozenHashEncoder,
  provider: NliProvider,
  cache: TripletCache,
  cfg: NliSanRunConfig,
): NliSanFoldRun[] {
  const pairCounts = new Set(
    entries.filter((e) => e.complete).map((e) => e.sentences.length),
  );
  if (pairCounts.size !== 1) {
    throw new Error(`complete entries disagree on pair count: ${[...pairCounts].join(", ")}`);
  }
  const pairs = [...pairCounts][0];
  return makeFolds(entries).map((fold) => {
    const model = new NliSanModel(
      { tokenDim: encoder.dim, attnDim: cfg.attnDim, valueDim: cfg.valueDim,
        hidden: cfg.hidden, pairs },
      cfg.seed,
    );
    const trainInputs = fold.train.map((entry) => ({
      input: entryPairInputs(entry, encoder, provider, cache),
      gold: LABELS.indexOf(entry.label),
    }));
    const params = model.namedParams().map((p) => p.values);
    const optimizer = new AdamW(params, {
      lr: cfg.lr, beta1: cfg.beta1, beta2: cfg.beta2, weightDecay: cfg.weightDecay,
    });
    const rand = mulberry32(cfg.seed);
    const epochLosses: number[] = [];
    for (let epoch = 0; epoch < cfg.epochs; epoch++) {
      const order = cfg.shuffle
        ? seededShuffle([...trainInputs.keys()], rand)
        : [...trainInputs.keys()];
      let total = 0;
      for (let start = 0; start < order.length; start += cfg.batchSize) {
        const batch = order.slice(start, start + cfg.batchSize);
        let accumulated: Float64Array[] | null = null;
        for (const idx of batch) {
          const { loss, grads } = model.lossAndGrads(
            trainInputs[idx].input, trainInputs[idx].gold,
          );
          total += loss;
          if (accumulated === null) {
            accumulated = grads;
          } else {
            for (let k = 0; k < grads.length; k++) {
              for (let i = 0; i < grads[k].length; i++) accumulated[k][i] += grads[k][i];
            }
          }
        }
        if (accumulated) {
          for (const g of accumulated) for (let i = 0; i < g.length; i++) g[i] /= batch.length;
          optimizer.step(accumulated);
        }
      }
      epochLosses.push(total / trainInputs.length);
    }
    const records: PredictionRecord[] = fold.test.map((entry) => {
      const probs = model.predictProbs(entryPairInputs(entry, encoder, provider, cache));
      let best = 0;
      for (let j = 1; j < probs.length; j++) if (probs[j] > probs[best]) best = j;
      return {
        thread_id: entry.thread_id,
        pair_index: 0,
        predicted_label: LABELS[best],
        fold: fold.heldOutEvent,
      };
    });
    return { heldOutEvent: fold.heldOutEvent, epochLosses, records };
  });
}
