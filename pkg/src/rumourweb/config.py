"""Run configuration: TOML file plus flag overrides, validated up front."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .io_utils import canonical_json, sha256_hex

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def data_path(name: str) -> str:
    """Absolute path of a packaged resource file."""
    return str(resources.files("rumourweb").joinpath("data", name))


@dataclass
class RunConfig:
    strategy: str = "preprocessed"
    backend: str = ""  # "offline:<corpus.jsonl>" or "live"
    want: int = 5
    max_articles: int = 10
    dictionary_path: str = ""
    stopword_path: str = ""
    url_embeddings_path: str = ""
    paragraph_embeddings_path: str = ""
    scorer_command: str = ""
    min_len: int = 5
    max_len: int = 20
    penalty_per_word: float = 0.02
    top_k: int = 5
    rate_limit: float = 1.0
    max_in_flight: int = 4
    output_dir: str = "."
    seed: int = 0

    def __post_init__(self):
        if not self.dictionary_path:
            self.dictionary_path = data_path("unigram_counts.txt")
        if not self.stopword_path:
            self.stopword_path = data_path("stopwords.txt")
        if not self.url_embeddings_path:
            self.url_embeddings_path = data_path("embeddings_demo.txt")
        if not self.paragraph_embeddings_path:
            self.paragraph_embeddings_path = data_path("embeddings_demo.txt")

    @property
    def offline_corpus_path(self) -> str | None:
        if self.backend.startswith("offline:"):
            return self.backend.split(":", 1)[1]
        return None

    def validate(self) -> "RunConfig":
        for name in (
            "dictionary_path",
            "stopword_path",
            "url_embeddings_path",
            "paragraph_embeddings_path",
        ):
            path = getattr(self, name)
            if path and not Path(path).exists():
                raise ConfigError(f"{name} does not exist: {path}")
        corpus = self.offline_corpus_path
        if corpus and not Path(corpus).exists():
            raise ConfigError(f"offline corpus does not exist: {corpus}")
        if self.backend and not (self.backend == "live" or corpus is not None):
            raise ConfigError(f"backend must be 'live' or 'offline:<path>', got {self.backend!r}")
        if self.want < 1:
            raise ConfigError("want must be >= 1")
        return self

    def hash(self) -> str:
        # output_dir only says where files land, not what they contain
        values = dataclasses.asdict(self)
        values.pop("output_dir")
        return sha256_hex(canonical_json(values))


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional TOML file; explicit flags win."""
    values: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                values.update(tomllib.load(fh))
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    try:
        return RunConfig(**values).validate()
    except TypeError as exc:
        raise ConfigError(str(exc))
