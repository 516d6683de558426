import { describe, expect, it } from "vitest";

import {
  NliSanModel,
  PairInput,
  finiteDifferenceGrads,
  maxRelativeError,
} from "../src/nliSan.js";
import { gaussian, mulberry32 } from "../src/rng.js";

const TOY = { tokenDim: 5, attnDim: 4, valueDim: 3, hidden: 6, pairs: 2 };

function randomTriplet(rand: () => number): Float64Array {
  const raw = [rand() + 0.05, rand() + 0.05, rand() + 0.05];
  const sum = raw.reduce((a, b) => a + b, 0);
  return Float64Array.from(raw.map((x) => x / sum));
}

function randomInput(seed: number, pairs = TOY.pairs, tokenDim = TOY.tokenDim): PairInput[] {
  const rand = mulberry32(seed);
  return Array.from({ length: pairs }, () => {
    const length = 1 + Math.floor(rand() * 4);
    return {
      triplet: randomTriplet(rand),
      tokens: Array.from({ length }, () =>
        Float64Array.from({ length: tokenDim }, () => gaussian(rand)),
      ),
    };
  });
}

describe("gradient correctness", () => {
  it("analytic gradients match central finite differences to 1e-4", () => {
    for (let seed = 1; seed <= 20; seed++) {
      const model = new NliSanModel(TOY, 100 + seed);
      const input = randomInput(seed);
      const gold = seed % 3;
      const { grads } = model.lossAndGrads(input, gold);
      const numeric = finiteDifferenceGrads(model, input, gold);
      const worst = maxRelativeError(grads, numeric);
      expect(worst).toBeLessThan(1e-4);
    }
  });

  it("loss decreases along the negative gradient", () => {
    const model = new NliSanModel(TOY, 3);
    const input = randomInput(9);
    const before = model.loss(input, 1);
    const { grads } = model.lossAndGrads(input, 1);
    const params = model.namedParams().map((p) => p.values);
    for (let k = 0; k < params.length; k++) {
      for (let i = 0; i < params[k].length; i++) params[k][i] -= 0.01 * grads[k][i];
    }
    expect(model.loss(input, 1)).toBeLessThan(before);
  });
});

describe("forward output", () => {
  it("is a normalized 3-class distribution for 1000 random inputs", () => {
    const model = new NliSanModel(TOY, 42);
    for (let seed = 0; seed < 1000; seed++) {
      const probs = model.predictProbs(randomInput(seed));
      let sum = 0;
      for (const p of probs) {
        expect(p).toBeGreaterThanOrEqual(0);
        expect(p).toBeLessThanOrEqual(1);
        sum += p;
      }
      expect(Math.abs(sum - 1)).toBeLessThan(1e-9);
    }
  });

  it("is stable under permutation when all pairs are identical", () => {
    const model = new NliSanModel(TOY, 5);
    const rand = mulberry32(77);
    const pair: PairInput = {
      triplet: randomTriplet(rand),
      tokens: [
        Float64Array.from({ length: TOY.tokenDim }, () => gaussian(rand)),
        Float64Array.from({ length: TOY.tokenDim }, () => gaussian(rand)),
      ],
    };
    const forward = model.predictProbs([pair, pair]);
    const reversed = model.predictProbs([pair, pair].reverse());
    expect([...reversed]).toEqual([...forward]);
  });

  it("rejects a wrong pair count or token dimension", () => {
    const model = new NliSanModel(TOY, 5);
    expect(() => model.predictProbs(randomInput(1, 3))).toThrow(/pairs/);
    expect(() => model.predictProbs(randomInput(1, TOY.pairs, 9))).toThrow(/dim/);
  });
});

describe("determinism", () => {
  it("same seed gives identical parameters and outputs", () => {
    const a = new NliSanModel(TOY, 9);
    const b = new NliSanModel(TOY, 9);
    const input = randomInput(4);
    expect([...a.predictProbs(input)]).toEqual([...b.predictProbs(input)]);
  });
});
