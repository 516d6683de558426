/** Wire types shared with the rumourweb toolkit (dataset in, predictions out). */

import { z } from "zod";

export const LABELS = ["false", "true", "unverified"] as const;
export type Label = (typeof LABELS)[number];

export const EVENTS = [
  "charliehebdo",
  "sydneysiege",
  "ferguson",
  "ottawashooting",
  "germanwings-crash",
] as const;
export type EventName = (typeof EVENTS)[number];

export const SCENARIOS = ["rumour", "evidence", "rumour+evidence"] as const;
export type Scenario = (typeof SCENARIOS)[number];

export const DATASET_SCHEMA_VERSION = 1;

export const SentenceSchema = z.object({
  text: z.string(),
  tokens: z.array(z.string()),
  source_url: z.string(),
  article_rank: z.number().int(),
  position: z.number().int(),
  raw_overlap: z.number().int(),
  score: z.number(),
});

export const DatasetEntrySchema = z.object({
  thread_id: z.string(),
  event: z.enum(EVENTS),
  label: z.enum(LABELS),
  source: z.object({ id: z.string(), text: z.string() }).loose(),
  reactions: z.array(z.object({ text: z.string() }).loose()).default([]),
  reaction_urls: z.array(z.string()).default([]),
  articles: z.array(z.object({ url: z.string(), title: z.string() }).loose()).default([]),
  sentences: z.array(SentenceSchema).default([]),
  strategy: z.string(),
  complete: z.boolean(),
});
export type DatasetEntry = z.infer<typeof DatasetEntrySchema>;

export interface PredictionRecord {
  thread_id: string;
  pair_index: number;
  predicted_label: Label;
  fold: EventName;
}

export interface NliTriplet {
  contradiction: number;
  neutrality: number;
  entailment: number;
}

export function assertTriplet(t: NliTriplet, tolerance = 1e-5): void {
  const values = [t.contradiction, t.neutrality, t.entailment];
  for (const v of values) {
    if (!(v >= 0 && v <= 1)) throw new Error(`triplet component ${v} outside [0, 1]`);
  }
  const sum = values.reduce((a, b) => a + b, 0);
  if (Math.abs(sum - 1) > tolerance) throw new Error(`triplet sums to ${sum}, not 1`);
}
