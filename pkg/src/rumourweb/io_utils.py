"""Versioned JSON Lines helpers shared by the pipeline stages."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import SchemaVersionMismatch

SCHEMA_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_stage_file(
    path: str | Path,
    records,
    stage: str,
    config_hash: str = "",
    seed: int | None = None,
) -> None:
    """Write a stage output: header line (version, stage, config hash, seed),
    then one record per line with sorted keys for diffability."""
    header = {
        "schema_version": SCHEMA_VERSION,
        "stage": stage,
        "config_hash": config_hash,
        "seed": seed,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(header) + "\n")
        for record in records:
            fh.write(canonical_json(record) + "\n")


def read_stage_file(path: str | Path) -> tuple[dict, list[dict]]:
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise SchemaVersionMismatch(None, SCHEMA_VERSION)
    header = json.loads(lines[0])
    if header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(header.get("schema_version"), SCHEMA_VERSION)
    return header, [json.loads(line) for line in lines[1:]]
