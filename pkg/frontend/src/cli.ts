/** Command-line entry: train models on a rumourweb dataset file and emit
 * prediction records for the toolkit's evaluate stage.
 *
 *   node dist/cli.js train-pair    --dataset dataset.jsonl --out predictions.jsonl
 *   node dist/cli.js train-nli-san --dataset dataset.jsonl --out predictions.jsonl
 *   node dist/cli.js compute-nli   --dataset dataset.jsonl --cache triplets.jsonl
 */

import { parseArgs } from "node:util";

import { readDataset, writePredictions } from "./dataset.js";
import { DEFAULT_ENCODER, FrozenHashEncoder } from "./encoder.js";
import { TripletCache, computeNliTriplets, resolveNliProvider } from "./nli.js";
import {
  FULL_PAIR_CONFIG,
  TOY_PAIR_CONFIG,
  trainAndPredictFolds,
} from "./pairClassifier.js";
import {
  FULL_NLI_SAN_CONFIG,
  TOY_NLI_SAN_CONFIG,
  trainNliSanFolds,
} from "./nliSanPipeline.js";
import { SCENARIOS, Scenario } from "./types.js";

function usageError(message: string): never {
  console.error(message);
  process.exit(1);
}

export function main(argv: string[]): number {
  const { values, positionals } = parseArgs({
    args: argv,
    allowPositionals: true,
    options: {
      dataset: { type: "string" },
      out: { type: "string", default: "predictions.jsonl" },
      scenario: { type: "string", default: "rumour+evidence" },
      config: { type: "string", default: "toy" },
      encoder: { type: "string", default: DEFAULT_ENCODER },
      "nli-checkpoint": { type: "string", default: "lexical-overlap-nli" },
      cache: { type: "string" },
      seed: { type: "string" },
    },
  });
  const command = positionals[0];
  if (!command) usageError("missing command: train-pair | train-nli-san | compute-nli");
  if (!values.dataset) usageError("--dataset is required");
  const entries = readDataset(values.dataset);
  const encoder = FrozenHashEncoder.byName(values.encoder!);
  const seed = values.seed ? Number(values.seed) : undefined;

  if (command === "train-pair") {
    const scenario = values.scenario as Scenario;
    if (!SCENARIOS.includes(scenario)) usageError(`unknown scenario ${values.scenario}`);
    const cfg = { ...(values.config === "full" ? FULL_PAIR_CONFIG : TOY_PAIR_CONFIG) };
    if (seed !== undefined) cfg.seed = seed;
    const runs = trainAndPredictFolds(entries, scenario, encoder, cfg);
    for (const run of runs) {
      console.error(
        `fold ${run.heldOutEvent}: losses ${run.epochLosses.map((l) => l.toFixed(4)).join(" -> ")}`,
      );
    }
    writePredictions(runs.flatMap((r) => r.records), values.out!);
    console.error(`wrote ${values.out}`);
    return 0;
  }

  if (command === "train-nli-san") {
    const provider = resolveNliProvider(values["nli-checkpoint"]);
    const cache = new TripletCache(values.cache);
    const cfg = { ...(values.config === "full" ? FULL_NLI_SAN_CONFIG : TOY_NLI_SAN_CONFIG) };
    if (seed !== undefined) cfg.seed = seed;
    const runs = trainNliSanFolds(entries, encoder, provider, cache, cfg);
    cache.flush();
    for (const run of runs) {
      console.error(
        `fold ${run.heldOutEvent}: losses ${run.epochLosses.map((l) => l.toFixed(4)).join(" -> ")}`,
      );
    }
    writePredictions(runs.flatMap((r) => r.records), values.out!);
    console.error(`wrote ${values.out}`);
    return 0;
  }

  if (command === "compute-nli") {
    if (!values.cache) usageError("--cache is required for compute-nli");
    const provider = resolveNliProvider(values["nli-checkpoint"]);
    const cache = new TripletCache(values.cache);
    const pairs = entries.flatMap((entry) =>
      entry.sentences.map((sentence, index) => ({
        threadId: entry.thread_id,
        sentenceIndex: index,
        premise: entry.source.text,
        hypothesis: sentence.text,
      })),
    );
    computeNliTriplets(pairs, provider, cache);
    console.error(
      `scored ${pairs.length} pairs (${cache.hits} cache hits, ${cache.misses} computed) -> ${values.cache}`,
    );
    return 0;
  }

  usageError(`unknown command ${command}`);
}

main(process.argv.slice(2));
