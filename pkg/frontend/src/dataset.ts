/** Reading the toolkit's versioned dataset files and writing prediction records. */

import { readFileSync, writeFileSync } from "node:fs";

import {
  DATASET_SCHEMA_VERSION,
  DatasetEntry,
  DatasetEntrySchema,
  EVENTS,
  EventName,
  PredictionRecord,
} from "./types.js";

export function readDataset(path: string): DatasetEntry[] {
  const lines = readFileSync(path, "utf-8")
    .split("\n")
    .filter((line) => line.trim().length > 0);
  if (lines.length === 0) throw new Error(`empty dataset file: ${path}`);
  const header = JSON.parse(lines[0]) as { schema_version?: number };
  if (header.schema_version !== DATASET_SCHEMA_VERSION) {
    throw new Error(
      `dataset schema version ${header.schema_version}, expected ${DATASET_SCHEMA_VERSION}`,
    );
  }
  return lines.slice(1).map((line, i) => {
    const parsed = DatasetEntrySchema.safeParse(JSON.parse(line));
    if (!parsed.success) {
      throw new Error(`bad dataset record on line ${i + 2}: ${parsed.error.message}`);
    }
    return parsed.data;
  });
}

export function writePredictions(records: PredictionRecord[], path: string): void {
  const lines = records.map((r) =>
    JSON.stringify({
      fold: r.fold,
      pair_index: r.pair_index,
      predicted_label: r.predicted_label,
      thread_id: r.thread_id,
    }),
  );
  writeFileSync(path, lines.join("\n") + (lines.length ? "\n" : ""));
}

export interface Fold {
  heldOutEvent: EventName;
  train: DatasetEntry[];
  test: DatasetEntry[];
}

/** Leave-one-event-out folds over quota-complete entries, mirroring the harness. */
export function makeFolds(entries: DatasetEntry[]): Fold[] {
  const usable = entries.filter((e) => e.complete);
  const byEvent = new Map<EventName, DatasetEntry[]>();
  for (const event of EVENTS) byEvent.set(event, []);
  for (const entry of usable) byEvent.get(entry.event)!.push(entry);
  for (const event of EVENTS) {
    if (byEvent.get(event)!.length === 0) throw new Error(`no complete entries for ${event}`);
  }
  return EVENTS.map((event) => ({
    heldOutEvent: event,
    test: byEvent.get(event)!.slice().sort((a, b) => a.thread_id.localeCompare(b.thread_id)),
    train: usable
      .filter((e) => e.event !== event)
      .sort((a, b) => a.thread_id.localeCompare(b.thread_id)),
  }));
}
