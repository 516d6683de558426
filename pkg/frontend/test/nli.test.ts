import { describe, expect, it } from "vitest";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import {
  DEFAULT_NLI_CHECKPOINT,
  LexicalOverlapNli,
  TripletCache,
  computeNliTriplets,
  resolveNliProvider,
} from "../src/nli.js";
import { assertTriplet } from "../src/types.js";

describe("lexical provider", () => {
  const nli = new LexicalOverlapNli();

  it("identical texts favour entailment", () => {
    const t = nli.triplet("The siege ended", "The siege ended");
    assertTriplet(t);
    expect(t.entailment).toBeGreaterThan(t.contradiction);
    expect(t.entailment).toBeGreaterThan(t.neutrality);
  });

  it("negated restatement favours contradiction", () => {
    const t = nli.triplet("The siege ended", "The siege never ended");
    expect(t.contradiction).toBeGreaterThan(t.entailment);
  });

  it("every triplet sums to one", () => {
    const pairs = [
      ["police arrested two suspects", "two suspects were arrested"],
      ["the plane crashed", "the weather was mild"],
      ["gunman holding hostages", "officials denied the hostage report"],
    ];
    for (const [a, b] of pairs) assertTriplet(nli.triplet(a, b));
  });

  it("rejects empty inputs", () => {
    expect(() => nli.triplet("something", "   ")).toThrow(/empty/);
  });
});

describe("checkpoint resolution", () => {
  it("the default published checkpoint is not loadable offline", () => {
    expect(() => resolveNliProvider(DEFAULT_NLI_CHECKPOINT)).toThrow(/not available/);
  });

  it("the builtin provider resolves by name", () => {
    expect(resolveNliProvider("lexical-overlap-nli").name).toBe("lexical-overlap-nli");
  });
});

describe("triplet cache", () => {
  const pairs = [
    { threadId: "t1", sentenceIndex: 0, premise: "a b c", hypothesis: "a b d" },
    { threadId: "t1", sentenceIndex: 1, premise: "a b c", hypothesis: "c e f" },
    { threadId: "t2", sentenceIndex: 0, premise: "x y", hypothesis: "x y" },
  ];

  it("second run hits the cache and never re-invokes the provider", () => {
    const dir = mkdtempSync(join(tmpdir(), "triplets-"));
    const path = join(dir, "cache.jsonl");
    let calls = 0;
    const counting = {
      name: "counting",
      triplet: (a: string, b: string) => {
        calls++;
        return new LexicalOverlapNli().triplet(a, b);
      },
    };
    const first = new TripletCache(path);
    computeNliTriplets(pairs, counting, first);
    expect(calls).toBe(3);
    expect(first.misses).toBe(3);

    const second = new TripletCache(path);
    const result = computeNliTriplets(pairs, counting, second);
    expect(calls).toBe(3); // zero provider invocations on the warm run
    expect(second.hits).toBe(3);
    expect(result.size).toBe(3);
  });

  it("empty evidence is a validation error", () => {
    const cache = new TripletCache();
    expect(() =>
      computeNliTriplets(
        [{ threadId: "t", sentenceIndex: 0, premise: "a", hypothesis: "" }],
        new LexicalOverlapNli(),
        cache,
      ),
    ).toThrow(/empty evidence/);
  });
});
