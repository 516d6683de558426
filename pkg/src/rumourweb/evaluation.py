"""Leave-one-event-out evaluation: folds, majority voting, macro F1.

Ships a lexical-prior baseline classifier so the whole pipeline, retrieval
through scoring, runs end to end without any neural model; externally trained
models plug in through the prediction-record exchange format instead.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .dataset import LABEL_ORDER, EnrichedEntry, Event, Label
from .errors import LengthMismatch, MissingEvent, UntrainedModel
from .text_prep import preprocess


class Scenario(str, Enum):
    RUMOUR_ONLY = "rumour"
    EVIDENCE_ONLY = "evidence"
    RUMOUR_PLUS_EVIDENCE = "rumour+evidence"


@dataclass(frozen=True)
class FoldSpec:
    held_out_event: Event
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]


@dataclass(frozen=True)
class PredictionRecord:
    thread_id: str
    pair_index: int
    predicted_label: Label
    fold: Event

    def __post_init__(self):
        if self.pair_index < 0:
            raise ValueError("pair_index must be non-negative")


@dataclass(frozen=True)
class EvalReport:
    per_event_f1: dict[Event, float]
    per_class_f1: dict[Label, float]
    macro_f1: float
    confusion: tuple[tuple[int, ...], ...]  # rows gold, cols predicted, LABEL_ORDER

    def __post_init__(self):
        mean = sum(self.per_class_f1[l] for l in LABEL_ORDER) / len(LABEL_ORDER)
        if abs(self.macro_f1 - mean) > 1e-9:
            raise ValueError("macro_f1 must equal the unweighted mean of class F1s")
        for value in list(self.per_class_f1.values()) + list(self.per_event_f1.values()):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"F1 value {value} outside [0, 1]")


def make_folds(entries: Sequence[EnrichedEntry]) -> list[FoldSpec]:
    """One fold per event; only quota-complete entries participate.

    Raises MissingEvent if any event has no complete entries left, since a
    fold with an empty test set would silently skew the cross-validation.
    """
    usable = [e for e in entries if e.complete]
    by_event: dict[Event, list[str]] = {event: [] for event in Event}
    for e in usable:
        by_event[e.thread.event].append(e.thread.thread_id)
    for event, ids in by_event.items():
        if not ids:
            raise MissingEvent(event.value)
    folds = []
    for event in Event:
        test = tuple(sorted(by_event[event]))
        train = tuple(sorted(i for ev, ids in by_event.items() if ev is not event for i in ids))
        folds.append(FoldSpec(held_out_event=event, train_ids=train, test_ids=test))
    return folds


def majority_vote(
    records: Sequence[PredictionRecord],
    train_label_counts: Mapping[Label, int] | None = None,
) -> Label:
    """Most frequent predicted label for one thread.

    Ties break toward the label most frequent in the fold's training split,
    then by the fixed order False < True < Unverified.
    """
    if not records:
        raise ValueError("majority_vote needs at least one record")
    votes = Counter(r.predicted_label for r in records)
    top = max(votes.values())
    tied = [label for label in LABEL_ORDER if votes.get(label, 0) == top]
    if len(tied) > 1 and train_label_counts is not None:
        tied.sort(key=lambda l: (-train_label_counts.get(l, 0), LABEL_ORDER.index(l)))
    return tied[0]


def unweighted_macro(values: Iterable[float]) -> float:
    """Macro aggregation: the plain unweighted mean of per-class scores."""
    vals = list(values)
    return sum(vals) / len(vals)


def _prf(gold: Sequence[Label], predicted: Sequence[Label], label: Label) -> tuple[float, float, float]:
    tp = sum(1 for g, p in zip(gold, predicted) if g is label and p is label)
    fp = sum(1 for g, p in zip(gold, predicted) if g is not label and p is label)
    fn = sum(1 for g, p in zip(gold, predicted) if g is label and p is not label)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def macro_f1(
    gold: Sequence[Label],
    predicted: Sequence[Label],
    events: Sequence[Event] | None = None,
) -> EvalReport:
    """Per-class F1 with the zero convention, macro mean, and a 3x3 confusion.

    Classes never predicted (or never gold) score 0 rather than being
    skipped, so heavily skewed folds stay comparable. When `events` aligns
    with the labels, per-event figures are the macro F1 within each event.
    """
    if len(gold) != len(predicted) or (events is not None and len(events) != len(gold)):
        raise LengthMismatch(
            f"gold={len(gold)} predicted={len(predicted)}"
            + (f" events={len(events)}" if events is not None else "")
        )
    class_f1 = {label: _prf(gold, predicted, label)[2] for label in LABEL_ORDER}
    confusion = tuple(
        tuple(
            sum(1 for g, p in zip(gold, predicted) if g is gl and p is pl)
            for pl in LABEL_ORDER
        )
        for gl in LABEL_ORDER
    )
    per_event: dict[Event, float] = {}
    if events is not None:
        for event in Event:
            pairs = [(g, p) for g, p, e in zip(gold, predicted, events) if e is event]
            if not pairs:
                continue
            eg, ep = zip(*pairs)
            per_event[event] = sum(_prf(eg, ep, label)[2] for label in LABEL_ORDER) / len(
                LABEL_ORDER
            )
    return EvalReport(
        per_event_f1=per_event,
        per_class_f1=class_f1,
        macro_f1=unweighted_macro(class_f1.values()),
        confusion=confusion,
    )


class LexicalPriorBaseline:
    """Label priors plus per-class token log-likelihoods (Laplace smoothed)."""

    def __init__(self):
        self._priors: dict[Label, float] | None = None
        self._token_logp: dict[Label, dict[str, float]] | None = None
        self._unseen_logp: dict[Label, float] = {}
        self._vocab: set[str] = set()

    def fit(self, token_lists: Sequence[Sequence[str]], labels: Sequence[Label]) -> "LexicalPriorBaseline":
        if len(token_lists) != len(labels):
            raise LengthMismatch("token lists and labels differ in length")
        self._vocab = {t.lower() for tokens in token_lists for t in tokens}
        label_counts = Counter(labels)
        total = sum(label_counts.values())
        self._priors = {
            label: math.log((label_counts.get(label, 0) + 1) / (total + len(LABEL_ORDER)))
            for label in LABEL_ORDER
        }
        self._token_logp = {}
        for label in LABEL_ORDER:
            counts: Counter[str] = Counter()
            for tokens, l in zip(token_lists, labels):
                if l is label:
                    counts.update(t.lower() for t in tokens)
            denom = sum(counts.values()) + len(self._vocab)
            self._token_logp[label] = {
                t: math.log((c + 1) / denom) for t, c in counts.items()
            }
            self._unseen_logp[label] = math.log(1 / denom)
        return self

    def predict(self, tokens: Iterable[str]) -> Label:
        if self._priors is None or self._token_logp is None:
            raise UntrainedModel("fit the baseline before predicting")
        scores = {}
        for label in LABEL_ORDER:
            logp = self._priors[label]
            table = self._token_logp[label]
            for t in tokens:
                t = t.lower()
                if t not in self._vocab:
                    continue  # unseen words carry no class signal
                logp += table.get(t, self._unseen_logp[label])
            scores[label] = logp
        return max(LABEL_ORDER, key=lambda l: (scores[l], -LABEL_ORDER.index(l)))


def baseline_classify(
    entry: EnrichedEntry, scenario: Scenario, model: LexicalPriorBaseline
) -> list[PredictionRecord]:
    """Predictions for one thread: one per evidence pair, or one for the rumour."""
    rumour_tokens = list(preprocess(entry.thread.source).tokens)
    if scenario is Scenario.RUMOUR_ONLY:
        inputs = [rumour_tokens]
    elif scenario is Scenario.EVIDENCE_ONLY:
        inputs = [list(s.tokens) for s in entry.selected_sentences]
    else:
        inputs = [rumour_tokens + list(s.tokens) for s in entry.selected_sentences]
    return [
        PredictionRecord(
            thread_id=entry.thread.thread_id,
            pair_index=i,
            predicted_label=model.predict(tokens),
            fold=entry.thread.event,
        )
        for i, tokens in enumerate(inputs)
    ]


def _training_inputs(entries: Sequence[EnrichedEntry], scenario: Scenario):
    token_lists, labels = [], []
    for e in entries:
        rumour_tokens = list(preprocess(e.thread.source).tokens)
        if scenario is Scenario.RUMOUR_ONLY:
            samples = [rumour_tokens]
        elif scenario is Scenario.EVIDENCE_ONLY:
            samples = [list(s.tokens) for s in e.selected_sentences]
        else:
            samples = [rumour_tokens + list(s.tokens) for s in e.selected_sentences]
        for s in samples:
            token_lists.append(s)
            labels.append(e.thread.label)
    return token_lists, labels


def run_loocv(
    entries: Sequence[EnrichedEntry], scenario: Scenario
) -> tuple[EvalReport, list[PredictionRecord]]:
    """Train and evaluate the baseline across the five event folds."""
    folds = make_folds(entries)
    by_id = {e.thread.thread_id: e for e in entries}
    gold: list[Label] = []
    predicted: list[Label] = []
    events: list[Event] = []
    all_records: list[PredictionRecord] = []
    for fold in folds:
        train_entries = [by_id[i] for i in fold.train_ids]
        token_lists, labels = _training_inputs(train_entries, scenario)
        model = LexicalPriorBaseline().fit(token_lists, labels)
        train_counts = Counter(e.thread.label for e in train_entries)
        for thread_id in fold.test_ids:
            entry = by_id[thread_id]
            records = baseline_classify(entry, scenario, model)
            all_records.extend(records)
            gold.append(entry.thread.label)
            predicted.append(majority_vote(records, train_counts))
            events.append(entry.thread.event)
    return macro_f1(gold, predicted, events), all_records


def aggregate_predictions(
    entries: Sequence[EnrichedEntry], records: Sequence[PredictionRecord]
) -> EvalReport:
    """Score an external model's prediction records against the gold labels.

    Majority voting uses each fold's training-label frequencies for ties,
    mirroring how the built-in baseline is scored.
    """
    usable = {e.thread.thread_id: e for e in entries if e.complete}
    by_thread: dict[str, list[PredictionRecord]] = {}
    for r in records:
        if r.thread_id in usable:
            by_thread.setdefault(r.thread_id, []).append(r)
    label_by_event: dict[Event, Counter] = {event: Counter() for event in Event}
    for e in usable.values():
        label_by_event[e.thread.event][e.thread.label] += 1
    total_counts = Counter()
    for c in label_by_event.values():
        total_counts.update(c)
    gold, predicted, events = [], [], []
    for thread_id in sorted(by_thread):
        entry = usable[thread_id]
        train_counts = total_counts - label_by_event[entry.thread.event]
        gold.append(entry.thread.label)
        predicted.append(majority_vote(by_thread[thread_id], train_counts))
        events.append(entry.thread.event)
    return macro_f1(gold, predicted, events)


def write_predictions(records: Sequence[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {
                        "thread_id": r.thread_id,
                        "pair_index": r.pair_index,
                        "predicted_label": r.predicted_label.value,
                        "fold": r.fold.value,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            r = json.loads(line)
            records.append(
                PredictionRecord(
                    thread_id=str(r["thread_id"]),
                    pair_index=int(r["pair_index"]),
                    predicted_label=Label(r["predicted_label"]),
                    fold=Event(r["fold"]),
                )
            )
    return records


def format_report(report: EvalReport) -> str:
    """Aligned text table: per-event columns, per-class columns, macro."""
    event_cols = [EVENT_ABBREV[e] for e in Event]
    header = (
        f"{'':<12}" + "".join(f"{c:>8}" for c in event_cols)
        + "".join(f"{l.value.title()[:10]:>12}" for l in LABEL_ORDER)
        + f"{'MacroF1':>10}"
    )
    row = f"{'F1':<12}"
    for e in Event:
        v = report.per_event_f1.get(e)
        row += f"{v:>8.3f}" if v is not None else f"{'-':>8}"
    for l in LABEL_ORDER:
        row += f"{report.per_class_f1[l]:>12.3f}"
    row += f"{report.macro_f1:>10.3f}"
    return header + "\n" + row


EVENT_ABBREV = {
    Event.CHARLIE_HEBDO: "Ch",
    Event.FERGUSON: "Fe",
    Event.GERMANWINGS_CRASH: "Ge",
    Event.OTTAWA_SHOOTING: "Ot",
    Event.SYDNEY_SIEGE: "Sy",
}
