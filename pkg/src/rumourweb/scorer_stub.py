"""Reference external scorer speaking the line-delimited JSON protocol.

Reads {"a": ..., "b": ...} per stdin line and answers {"score": ...}: the
token-set F1 of the two texts. Deterministic, dependency-free, and useful
both as a test double and as a template for wiring in a real scorer.

Run with: python -m rumourweb.scorer_stub
"""

from __future__ import annotations

import json
import re
import sys

_WORD_RE = re.compile(r"[a-z0-9']+")


def overlap_f1(a: str, b: str) -> float:
    sa = set(_WORD_RE.findall(a.lower()))
    sb = set(_WORD_RE.findall(b.lower()))
    if not sa or not sb:
        return 0.0
    inter = len(sa & sb)
    if inter == 0:
        return 0.0
    return 2.0 * inter / (len(sa) + len(sb))


def main() -> int:
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        request = json.loads(line)
        score = overlap_f1(request.get("a", ""), request.get("b", ""))
        sys.stdout.write(json.dumps({"score": score}) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
