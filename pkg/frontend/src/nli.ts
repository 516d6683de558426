/** NLI triplet providers and the on-disk triplet cache.
 *
 * The default checkpoint name matches the published large MNLI model, but no
 * checkpoint download exists in offline environments; the built-in lexical
 * provider is the always-available fallback. Unknown names fail loudly so a
 * missing model never silently degrades into the heuristic.
 */

import { existsSync, readFileSync, writeFileSync } from "node:fs";

import { NliTriplet, assertTriplet } from "./types.js";
import { tokenizeForEncoder } from "./encoder.js";

export interface NliProvider {
  readonly name: string;
  triplet(premise: string, hypothesis: string): NliTriplet;
}

const NEGATION_WORDS = new Set([
  "not", "no", "never", "n't", "denies", "denied", "deny", "fake", "hoax",
  "false", "untrue", "debunked", "wrong",
]);

function softmax3(a: number, b: number, c: number): [number, number, number] {
  const m = Math.max(a, b, c);
  const ea = Math.exp(a - m);
  const eb = Math.exp(b - m);
  const ec = Math.exp(c - m);
  const s = ea + eb + ec;
  return [ea / s, eb / s, ec / s];
}

/** Deterministic lexical heuristic: overlap drives entailment, a negation
 * mismatch flips the signal toward contradiction. */
export class LexicalOverlapNli implements NliProvider {
  readonly name = "lexical-overlap-nli";

  triplet(premise: string, hypothesis: string): NliTriplet {
    const a = new Set(tokenizeForEncoder(premise));
    const b = new Set(tokenizeForEncoder(hypothesis));
    if (a.size === 0 || b.size === 0) {
      throw new Error("cannot score an empty premise or hypothesis");
    }
    let inter = 0;
    for (const t of a) if (b.has(t)) inter++;
    const overlap = (2 * inter) / (a.size + b.size);
    const negA = [...a].filter((t) => NEGATION_WORDS.has(t)).length;
    const negB = [...b].filter((t) => NEGATION_WORDS.has(t)).length;
    const negationMismatch = (negA % 2) !== (negB % 2) ? 1 : 0;
    const [contradiction, neutrality, entailment] = softmax3(
      2.0 * negationMismatch * (0.5 + overlap),
      1.0 - overlap,
      3.0 * overlap * (1 - negationMismatch),
    );
    const t = { contradiction, neutrality, entailment };
    assertTriplet(t);
    return t;
  }
}

export const DEFAULT_NLI_CHECKPOINT = "roberta-large-mnli";

const PROVIDERS: Record<string, () => NliProvider> = {
  "lexical-overlap-nli": () => new LexicalOverlapNli(),
};

export function resolveNliProvider(checkpoint: string = DEFAULT_NLI_CHECKPOINT): NliProvider {
  const factory = PROVIDERS[checkpoint];
  if (!factory) {
    throw new Error(
      `NLI checkpoint ${checkpoint} is not available in this environment ` +
        `(no model downloads); available: ${Object.keys(PROVIDERS).join(", ")}`,
    );
  }
  return factory();
}

export function tripletKey(threadId: string, sentenceIndex: number): string {
  return `${threadId}#${sentenceIndex}`;
}

/** Write-once file cache so the fusion model trains without re-encoding. */
export class TripletCache {
  private store = new Map<string, NliTriplet>();
  hits = 0;
  misses = 0;

  constructor(private readonly path?: string) {
    if (path && existsSync(path)) {
      for (const line of readFileSync(path, "utf-8").split("\n")) {
        if (!line.trim()) continue;
        const { key, triplet } = JSON.parse(line) as { key: string; triplet: NliTriplet };
        this.store.set(key, triplet);
      }
    }
  }

  getOrCompute(key: string, compute: () => NliTriplet): NliTriplet {
    const cached = this.store.get(key);
    if (cached) {
      this.hits++;
      return cached;
    }
    this.misses++;
    const value = compute();
    assertTriplet(value);
    this.store.set(key, value);
    return value;
  }

  flush(): void {
    if (!this.path) return;
    const lines = [...this.store.entries()]
      .sort(([a], [b]) => a.localeCompare(b))
      .map(([key, triplet]) => JSON.stringify({ key, triplet }));
    writeFileSync(this.path, lines.join("\n") + (lines.length ? "\n" : ""));
  }
}

export interface PairToScore {
  threadId: string;
  sentenceIndex: number;
  premise: string;
  hypothesis: string;
}

export function computeNliTriplets(
  pairs: PairToScore[],
  provider: NliProvider,
  cache: TripletCache,
): Map<string, NliTriplet> {
  const out = new Map<string, NliTriplet>();
  for (const pair of pairs) {
    if (!pair.hypothesis.trim()) {
      throw new Error(`empty evidence sentence for ${pair.threadId}#${pair.sentenceIndex}`);
    }
    const key = tripletKey(pair.threadId, pair.sentenceIndex);
    out.set(key, cache.getOrCompute(key, () => provider.triplet(pair.premise, pair.hypothesis)));
  }
  cache.flush();
  return out;
}
