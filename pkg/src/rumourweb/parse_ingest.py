"""Dependency-parse ingestion and clause-triple extraction.

Parses arrive as CoNLL-U files from whatever parser produced them; triples can
either be read from an external extractor's TSV output or derived here with a
rule-based extractor over the parse tree.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .errors import MalformedParse, SpanNotFound

logger = logging.getLogger(__name__)

# Dependency relations whose tokens are kept in place when shortening a query,
# matched exactly (so "compound:prt" is not "compound").
DEFAULT_RETAIN_RELS = frozenset(
    {
        "obl:npmod",
        "compound",
        "advcl",
        "nummod",
        "acl:relcl",
        "nsubj:pass",
        "acl",
        "amod",
        "aux:pass",
    }
)

# Modifier relations whose head token is kept alongside the modifier.
_HEAD_KEEPING_RELS = frozenset({"compound", "amod", "nummod"})

_SUBJECT_RELS = frozenset({"nsubj", "nsubj:pass"})
_PREDICATE_PART_RELS = frozenset({"aux", "aux:pass", "cop", "compound:prt"})
_OBJECT_RELS = frozenset({"obj", "iobj", "ccomp", "xcomp", "obl"})
_CLAUSE_RELS = frozenset(
    {"root", "conj", "parataxis", "advcl", "acl", "acl:relcl", "ccomp", "csubj", "csubj:pass"}
)
# Edges not descended into when taking the yield of a clause constituent.
_YIELD_CUT_RELS = frozenset({"conj", "cc", "punct"})
# Governor edges walked upward when a clause is missing its own subject.
_SUBJECT_INHERIT_RELS = frozenset(
    {"conj", "xcomp", "ccomp", "advcl", "acl", "acl:relcl", "parataxis"}
)


@dataclass(frozen=True)
class ParseToken:
    index: int
    surface: str
    lemma: str
    upos: str
    head: int
    deprel: str

    def __post_init__(self):
        if self.index < 1:
            raise MalformedParse(f"token index {self.index} < 1")
        if not self.deprel:
            raise MalformedParse(f"token {self.index} has empty deprel")


@dataclass(frozen=True)
class ParsedSentence:
    sentence_id: str
    tokens: tuple[ParseToken, ...]

    def __post_init__(self):
        n = len(self.tokens)
        indices = [t.index for t in self.tokens]
        if indices != list(range(1, n + 1)):
            raise MalformedParse(
                f"sentence {self.sentence_id!r}: token indices not contiguous 1..{n}"
            )
        roots = [t for t in self.tokens if t.head == 0]
        if len(roots) != 1:
            raise MalformedParse(
                f"sentence {self.sentence_id!r}: expected exactly one root, got {len(roots)}"
            )
        for t in self.tokens:
            if t.head < 0 or t.head > n:
                raise MalformedParse(
                    f"sentence {self.sentence_id!r}: token {t.index} head {t.head} out of range"
                )
        # Every token must reach the root; a walk longer than n means a cycle.
        for t in self.tokens:
            cur, steps = t.head, 0
            while cur != 0:
                cur = self.tokens[cur - 1].head
                steps += 1
                if steps > n:
                    raise MalformedParse(
                        f"sentence {self.sentence_id!r}: cycle through token {t.index}"
                    )

    def token(self, index: int) -> ParseToken:
        return self.tokens[index - 1]

    def children(self) -> dict[int, list[ParseToken]]:
        out: dict[int, list[ParseToken]] = {}
        for t in self.tokens:
            out.setdefault(t.head, []).append(t)
        return out

    def surfaces(self, indices) -> list[str]:
        return [self.tokens[i - 1].surface for i in indices]


@dataclass(frozen=True)
class Triple:
    """Clause-level (subject, predicate, object) spans as token indices."""

    subject_idxs: tuple[int, ...]
    predicate_idxs: tuple[int, ...]
    object_idxs: tuple[int, ...]

    def __post_init__(self):
        if not self.subject_idxs or not self.predicate_idxs:
            raise ValueError("subject and predicate must be non-empty")
        for name, idxs in (
            ("subject", self.subject_idxs),
            ("predicate", self.predicate_idxs),
            ("object", self.object_idxs),
        ):
            if list(idxs) != sorted(idxs):
                raise ValueError(f"{name} indices must be sorted ascending")
        sets = [set(self.subject_idxs), set(self.predicate_idxs), set(self.object_idxs)]
        if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
            raise ValueError("triple index lists must be pairwise disjoint")

    def all_indices(self) -> set[int]:
        return set(self.subject_idxs) | set(self.predicate_idxs) | set(self.object_idxs)


def read_parses(path: str | Path, strict: bool = True) -> dict[str, ParsedSentence]:
    """Read a 10-column CoNLL-U file keyed by its `# sent_id =` comments.

    Multiword-token and empty-node lines are skipped. With strict=True a
    malformed block raises MalformedParse carrying the offending line number;
    otherwise the block is dropped with a warning.
    """
    with open(path, encoding="utf-8") as fh:
        return parse_conllu(fh, strict=strict)


def parse_conllu(lines, strict: bool = True) -> dict[str, ParsedSentence]:
    """Parse CoNLL-U content from any iterable of lines; see read_parses."""
    parses: dict[str, ParsedSentence] = {}
    block: list[tuple[int, str]] = []
    sent_id: str | None = None
    block_start = 1
    anon = 0

    def flush(line_no: int):
        nonlocal block, sent_id, anon
        if not block:
            sent_id = None
            return
        sid = sent_id
        if sid is None:
            anon += 1
            sid = f"s{anon}"
        try:
            tokens = []
            for ln, row in block:
                cols = row.split("\t")
                if len(cols) != 10:
                    raise MalformedParse(f"expected 10 columns, got {len(cols)}", ln)
                try:
                    idx = int(cols[0])
                    head = int(cols[6])
                except ValueError as exc:
                    raise MalformedParse(str(exc), ln) from exc
                tokens.append(
                    ParseToken(
                        index=idx, surface=cols[1], lemma=cols[2],
                        upos=cols[3], head=head, deprel=cols[7],
                    )
                )
            seen = [t.index for t in tokens]
            if len(set(seen)) != len(seen):
                raise MalformedParse("duplicated token index", block[0][0])
            sentence = ParsedSentence(sentence_id=sid, tokens=tuple(tokens))
        except MalformedParse as exc:
            if exc.line is None:
                exc = MalformedParse(str(exc), block[0][0])
            if strict:
                raise exc
            logger.warning("skipping malformed parse block: %s", exc)
        else:
            parses[sid] = sentence
        block = []
        sent_id = None

    for line_no, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            flush(line_no)
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if body.startswith("sent_id"):
                sent_id = body.split("=", 1)[1].strip() if "=" in body else sent_id
            continue
        first = line.split("\t", 1)[0]
        if "-" in first or "." in first:
            continue  # multiword range / empty node
        if not block:
            block_start = line_no
        block.append((line_no, line))
    flush(block_start + len(block))
    return parses


def retain_by_deprel(p: ParsedSentence, relset: frozenset[str] | set[str]) -> tuple[ParseToken, ...]:
    """Tokens whose relation is in `relset`, kept in original order.

    Heads of retained compound/amod/nummod modifiers are kept too, since a
    bare modifier without its noun is useless in a query.
    """
    keep: set[int] = set()
    for t in p.tokens:
        if t.deprel in relset:
            keep.add(t.index)
            if t.deprel in _HEAD_KEEPING_RELS and t.head > 0:
                keep.add(t.head)
    return tuple(t for t in p.tokens if t.index in keep)


def _yield_indices(p: ParsedSentence, root_index: int, children: dict[int, list[ParseToken]]) -> list[int]:
    """All indices under `root_index`, not descending into conj/cc/punct."""
    out = [root_index]
    stack = [root_index]
    while stack:
        cur = stack.pop()
        for child in children.get(cur, ()):
            if child.deprel in _YIELD_CUT_RELS:
                continue
            out.append(child.index)
            stack.append(child.index)
    return sorted(out)


def _find_subject(
    p: ParsedSentence, head: ParseToken, children: dict[int, list[ParseToken]]
) -> list[int] | None:
    cur = head
    for _ in range(4):
        for child in children.get(cur.index, ()):
            if child.deprel in _SUBJECT_RELS:
                return _yield_indices(p, child.index, children)
        if cur.deprel in _SUBJECT_INHERIT_RELS and cur.head > 0:
            cur = p.token(cur.head)
        else:
            return None
    return None


def extract_triples(p: ParsedSentence) -> list[Triple]:
    """Rule-based clause extraction over a dependency tree.

    A clause head is a verb (or a copular head) sitting at the root, attached
    by a clausal relation, or carrying its own subject. Each head yields one
    triple: the subject subtree, the head plus its auxiliaries/particles, and
    the merged yield of its object-like dependents. Heads whose subject cannot
    be resolved (walking up conj/xcomp-style governors) produce nothing, so a
    verbless sentence gives an empty list.
    """
    children = p.children()
    triples: list[Triple] = []
    for t in p.tokens:
        kids = children.get(t.index, ())
        has_cop = any(c.deprel == "cop" for c in kids)
        has_subj = any(c.deprel in _SUBJECT_RELS for c in kids)
        if not (t.upos == "VERB" or has_cop):
            continue
        if not (t.deprel in _CLAUSE_RELS or has_subj):
            continue
        subject = _find_subject(p, t, children)
        if not subject:
            continue
        predicate = sorted(
            {t.index} | {c.index for c in kids if c.deprel in _PREDICATE_PART_RELS}
        )
        obj: set[int] = set()
        for c in kids:
            if c.deprel in _OBJECT_RELS:
                obj.update(_yield_indices(p, c.index, children))
        # Defensive: keep the three spans disjoint whatever the tree shape.
        obj -= set(subject) | set(predicate)
        subject = [i for i in subject if i not in predicate]
        if not subject:
            continue
        triples.append(
            Triple(
                subject_idxs=tuple(subject),
                predicate_idxs=tuple(predicate),
                object_idxs=tuple(sorted(obj)),
            )
        )
    return triples


def _match_span(
    words: list[str], p: ParsedSentence, used: set[int]
) -> list[int]:
    """Greedy longest-contiguous-run alignment of span words to tokens."""
    surfaces = [t.surface for t in p.tokens]
    n = len(surfaces)
    matched: list[int] = []
    i = 0
    search_from = 0
    while i < len(words):
        best: tuple[int, int] | None = None  # (length, start position 0-based)
        for start in list(range(search_from, n)) + list(range(0, search_from)):
            if start + 1 in used or surfaces[start] != words[i]:
                continue
            length = 0
            while (
                i + length < len(words)
                and start + length < n
                and start + length + 1 not in used
                and surfaces[start + length] == words[i + length]
            ):
                length += 1
            if best is None or length > best[0]:
                best = (length, start)
        if best is None or best[0] == 0:
            return []
        length, start = best
        run = list(range(start + 1, start + 1 + length))
        matched.extend(run)
        used.update(run)
        i += length
        search_from = start + length
    return matched


def read_triples(
    path: str | Path, parses: dict[str, ParsedSentence]
) -> dict[str, list[Triple]]:
    """Read an extractor's TSV output (id, subject, predicate, object).

    Each span is matched back to token indices of the identified sentence by
    longest contiguous surface match; a span word with no remaining match
    raises SpanNotFound naming the line's sentence id and field.
    """
    with open(path, encoding="utf-8") as fh:
        return parse_triples(fh, parses)


def parse_triples(lines, parses: dict[str, ParsedSentence]) -> dict[str, list[Triple]]:
    """Parse triple TSV content from any iterable of lines; see read_triples."""
    triples: dict[str, list[Triple]] = {}
    for line in lines:
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 3:
            raise SpanNotFound(parts[0] if parts else "?", "line")
        sid = parts[0]
        subject, predicate = parts[1], parts[2]
        obj = parts[3] if len(parts) > 3 else ""
        if sid not in parses:
            raise SpanNotFound(sid, "sentence")
        p = parses[sid]
        used: set[int] = set()
        fields = {}
        for name, span in (("subject", subject), ("predicate", predicate), ("object", obj)):
            words = span.split()
            if not words:
                fields[name] = []
                continue
            idxs = _match_span(words, p, used)
            if not idxs:
                raise SpanNotFound(sid, name)
            fields[name] = sorted(idxs)
        triples.setdefault(sid, []).append(
            Triple(
                subject_idxs=tuple(fields["subject"]),
                predicate_idxs=tuple(fields["predicate"]),
                object_idxs=tuple(fields["object"]),
            )
        )
    return triples


def read_triple_words(path: str | Path) -> dict[str, set[str]]:
    """Read the same TSV as `read_triples`, keeping only the span words.

    Used for evidence-sentence scoring, where sentences come from articles
    that have no token-level parse to align against.
    """
    with open(path, encoding="utf-8") as fh:
        return parse_triple_words(fh)


def parse_triple_words(lines) -> dict[str, set[str]]:
    words: dict[str, set[str]] = {}
    for line in lines:
        line = line.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 3:
            continue
        bag = words.setdefault(parts[0], set())
        for span in parts[1:4]:
            bag.update(w.lower() for w in span.split())
    return words
