"""Command-line client for the rumourweb service.

Each subcommand reads the previous stage's file, calls the service, and
writes its own output file, so any stage can be re-run independently. By
default the CLI serves itself in-process (no network socket); point
--server at a running instance to go remote.

Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import httpx

from .config import RunConfig, load_config
from .errors import ConfigError, RumourWebError, SchemaVersionMismatch
from .io_utils import read_stage_file, write_stage_file

logger = logging.getLogger(__name__)


class ServiceClient:
    """HTTP client for the service; in-process ASGI unless --server is given."""

    def __init__(self, config: RunConfig, server: str | None = None):
        self.config = config
        if server:
            self._client = httpx.Client(base_url=server, timeout=120.0)
        else:
            from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app(config), raise_server_exceptions=False)

    def post(self, path: str, payload: dict) -> dict:
        response = self._client.post(path, json=payload)
        return self._handle(response)

    def get(self, path: str, **params) -> dict:
        response = self._client.get(path, params=params)
        return self._handle(response)

    @staticmethod
    def _handle(response: httpx.Response) -> dict:
        if response.status_code >= 400:
            try:
                detail = response.json()
            except json.JSONDecodeError:
                detail = {"error": "HTTPError", "detail": response.text}
            raise RumourWebError(
                f"{detail.get('error', 'error')}: {detail.get('detail', response.status_code)}"
            )
        return response.json()

    def close(self):
        self._client.close()


def _read_records(path: str) -> list[dict]:
    _, records = read_stage_file(path)
    return records


def _write(args, client: ServiceClient, name: str, stage: str, records) -> Path:
    out_dir = Path(args.out_dir or client.config.output_dir)
    out_path = out_dir / name
    write_stage_file(
        out_path, records, stage,
        config_hash=client.config.hash(), seed=client.config.seed,
    )
    logger.info("wrote %s", out_path)
    return out_path


def _collect_raw_threads(corpus_dir: str) -> list[dict]:
    """Walk the corpus tree and read the raw JSON records (no interpretation)."""
    root = Path(corpus_dir)
    if not root.is_dir():
        raise ConfigError(f"corpus directory does not exist: {corpus_dir}")
    threads = []
    for event_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for thread_dir in sorted(p for p in event_dir.iterdir() if p.is_dir()):
            source_files = sorted((thread_dir / "source-tweets").glob("*.json"))
            if not source_files:
                raise ConfigError(f"no source tweet in {thread_dir}")
            preferred = [p for p in source_files if p.stem == thread_dir.name]
            annotation_path = thread_dir / "annotation.json"
            if not annotation_path.exists():
                raise ConfigError(f"no annotation.json in {thread_dir}")
            threads.append(
                {
                    "event": event_dir.name,
                    "thread_id": thread_dir.name,
                    "source": json.loads((preferred or source_files)[0].read_text()),
                    "reactions": [
                        json.loads(p.read_text())
                        for p in sorted((thread_dir / "reactions").glob("*.json"))
                    ],
                    "annotation": json.loads(annotation_path.read_text()),
                }
            )
    return threads


def cmd_preprocess(args, client: ServiceClient) -> int:
    raw = _collect_raw_threads(args.corpus)
    result = client.post("/api/corpus/parse", {"threads": raw})
    _write(args, client, args.out, "threads", result["threads"])
    skipped = [t["thread_id"] for t in result["threads"] if t.get("error")]
    if skipped:
        logger.warning("threads with empty source after cleaning: %s", skipped)
    return 0


def cmd_build_queries(args, client: ServiceClient) -> int:
    threads = _read_records(args.threads)
    tweets = [t["preprocessed"] for t in threads if t.get("preprocessed")]
    payload = {"tweets": tweets, "strategy": args.strategy}
    if args.parses:
        payload["conllu"] = Path(args.parses).read_text(encoding="utf-8")
    if args.triples:
        payload["triples_tsv"] = Path(args.triples).read_text(encoding="utf-8")
    result = client.post("/api/queries/build", payload)
    for failure in result["failures"]:
        logger.warning("no query for %s: %s", failure["source_id"], failure["error"])
    _write(args, client, args.out, "queries", result["queries"])
    if args.print_queries:
        for q in result["queries"]:
            print(q["rendered"])
    return 0


def cmd_search(args, client: ServiceClient) -> int:
    queries = _read_records(args.queries)
    result = client.post(
        "/api/search", {"queries": queries, "want": args.want or client.config.want}
    )
    _write(args, client, args.out, "articles", result["results"])
    return 0


def cmd_select_sentences(args, client: ServiceClient) -> int:
    threads = {t["thread_id"]: t for t in _read_records(args.threads)}
    articles = _read_records(args.articles)
    items = []
    for row in articles:
        thread = threads.get(row["source_id"])
        if thread and thread.get("preprocessed") and row["articles"]:
            items.append({"rumour": thread["preprocessed"], "articles": row["articles"]})
    payload: dict = {"items": items}
    if args.triples:
        payload["triples_tsv"] = Path(args.triples).read_text(encoding="utf-8")
    result = client.post("/api/sentences/select", payload)
    _write(args, client, args.out, "sentences", result["items"])
    return 0


def cmd_assemble(args, client: ServiceClient) -> int:
    threads = _read_records(args.threads)
    article_rows = _read_records(args.articles)
    payload: dict = {
        "threads": threads,
        "articles": {row["source_id"]: row["articles"] for row in article_rows},
        "strategy": args.strategy,
    }
    if args.triples:
        payload["triples_tsv"] = Path(args.triples).read_text(encoding="utf-8")
    result = client.post("/api/dataset/assemble", payload)
    _write(args, client, args.out, "dataset", result["entries"])
    print(f"completeness: {result['completeness_ratio']:.4f}")
    return 0


def cmd_stats(args, client: ServiceClient) -> int:
    if args.dataset:
        payload = {"entries": _read_records(args.dataset)}
    else:
        payload = {"threads": _read_records(args.threads)}
    result = client.post("/api/dataset/stats", payload)
    print(result["table"])
    _write(args, client, args.out, "stats", [result["total"], *result["per_event"]])
    return 0


def cmd_overlap(args, client: ServiceClient) -> int:
    result = client.post("/api/dataset/overlap", {"entries": _read_records(args.dataset)})
    for key, value in result.items():
        print(f"{key:<28}{value}")
    _write(args, client, args.out, "overlap", [result])
    return 0


def cmd_score_retrieval(args, client: ServiceClient) -> int:
    threads = {t["thread_id"]: t for t in _read_records(args.threads)}
    evidence: dict[str, list[dict]] = {}
    for spec in args.articles:
        strategy, _, path = spec.partition("=")
        if not path:
            strategy, path = args.strategy, spec
        bundles = []
        for row in _read_records(path):
            thread = threads.get(row["source_id"])
            if not thread or not thread.get("preprocessed"):
                continue
            bundles.append(
                {
                    "rumour": thread["preprocessed"],
                    "response_urls": thread.get("reaction_urls", []),
                    "articles": row["articles"],
                }
            )
        evidence[strategy] = bundles
    result = client.post(
        "/api/metrics/score",
        {"evidence": evidence, "use_external_scorer": args.external_scorer},
    )
    for report in result["reports"]:
        ext = report["external_score"]
        print(
            f"{report['strategy']:<14} url_words={report['url_words_score']:.4f} "
            f"paragraph={report['paragraph_embed_score']:.4f} "
            f"external={'-' if ext is None else f'{ext:.4f}'} "
            f"n_articles={report['n_articles']}"
        )
    for metric, order in result["rankings"].items():
        print(f"ranking[{metric}]: {' > '.join(order)}")
    _write(args, client, args.out, "metrics", [result])
    return 0


def cmd_evaluate(args, client: ServiceClient) -> int:
    entries = _read_records(args.dataset)
    payload: dict = {"entries": entries, "scenario": args.scenario}
    if args.predictions != "baseline":
        records = []
        with open(args.predictions, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(json.loads(line))
        # tolerate a stage header on prediction files
        if records and "schema_version" in records[0]:
            records = records[1:]
        payload["predictions"] = records
    result = client.post("/api/evaluate", payload)
    print(result["table"])
    report = {k: result[k] for k in ("per_event_f1", "per_class_f1", "macro_f1", "confusion")}
    _write(args, client, args.out, "report", [report])
    if args.predictions == "baseline" and args.save_predictions:
        _write(args, client, args.save_predictions_name, "predictions", result["predictions"])
    return 0


def cmd_compare_strategies(args, client: ServiceClient) -> int:
    return cmd_score_retrieval(args, client)


def cmd_serve(args, client: ServiceClient) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(client.config), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rumourweb",
        description="Evidence retrieval and veracity evaluation for rumour threads.",
    )
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--server", help="base URL of a running service (default: in-process)")
    parser.add_argument("--out-dir", help="directory for stage outputs")
    parser.add_argument("--seed", type=int, help="run seed recorded in outputs")
    parser.add_argument(
        "--backend", help="search backend: 'live' or 'offline:<corpus.jsonl>'"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="load a corpus tree and clean the tweets")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default="threads.jsonl")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("build-queries", help="render search queries for one strategy")
    p.add_argument("--threads", required=True)
    p.add_argument("--strategy", choices=["preprocessed", "deprel", "triple"],
                   default="preprocessed")
    p.add_argument("--parses", help="CoNLL-U file for the shortening strategies")
    p.add_argument("--triples", help="triple TSV from an external extractor")
    p.add_argument("--out", default="queries.jsonl")
    p.add_argument("--print-queries", action="store_true")
    p.set_defaults(func=cmd_build_queries)

    p = sub.add_parser("search", help="run queries against the configured backend")
    p.add_argument("--queries", required=True)
    p.add_argument("--want", type=int, help="non-empty results per query")
    p.add_argument("--max-results", type=int, dest="want")
    p.add_argument("--rate-limit", type=float)
    p.add_argument("--out", default="articles.jsonl")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("select-sentences", help="pick the top evidence sentences")
    p.add_argument("--threads", required=True)
    p.add_argument("--articles", required=True)
    p.add_argument("--triples", help="triple TSV keyed by <url>#<sentence index>")
    p.add_argument("--out", default="sentences.jsonl")
    p.set_defaults(func=cmd_select_sentences)

    p = sub.add_parser("assemble", help="join threads, evidence and sentences")
    p.add_argument("--threads", required=True)
    p.add_argument("--articles", required=True)
    p.add_argument("--triples")
    p.add_argument("--strategy", choices=["preprocessed", "deprel", "triple"],
                   default="preprocessed")
    p.add_argument("--out", default="dataset.jsonl")
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("stats", help="per-event corpus statistics")
    p.add_argument("--dataset")
    p.add_argument("--threads")
    p.add_argument("--out", default="stats.jsonl")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("overlap", help="web vs thread URL overlap analysis")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", default="overlap.jsonl")
    p.set_defaults(func=cmd_overlap)

    for name, help_text in (
        ("score-retrieval", "score one strategy's evidence"),
        ("compare-strategies", "score and rank several strategies"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--threads", required=True)
        p.add_argument(
            "--articles", nargs="+", required=True,
            metavar="[STRATEGY=]ARTICLES_FILE",
        )
        p.add_argument("--strategy", default="preprocessed",
                       help="strategy label for unlabelled --articles")
        p.add_argument("--external-scorer", action="store_true")
        p.add_argument("--out", default="metrics.jsonl")
        p.set_defaults(func=cmd_score_retrieval)

    p = sub.add_parser("evaluate", help="leave-one-event-out evaluation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", default="baseline",
                   help="'baseline' or a prediction-record JSONL file")
    p.add_argument("--scenario", choices=["rumour", "evidence", "rumour+evidence"],
                   default="rumour+evidence")
    p.add_argument("--save-predictions", action="store_true")
    p.add_argument("--save-predictions-name", default="predictions.jsonl")
    p.add_argument("--out", default="report.jsonl")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    overrides = {
        "output_dir": args.out_dir,
        "seed": args.seed,
        "backend": args.backend,
        "rate_limit": getattr(args, "rate_limit", None),
        "want": getattr(args, "want", None),
        "strategy": getattr(args, "strategy", None),
    }
    try:
        config = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    client = ServiceClient(config, args.server)
    try:
        return args.func(args, client)
    except (ConfigError, SchemaVersionMismatch) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except RumourWebError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    finally:
        client.close()


if __name__ == "__main__":
    raise SystemExit(main())
