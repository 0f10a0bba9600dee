"""Command-line entry point.

Subcommands wire config, corpus, gateway, pipeline, analytics, and
reporting together. Exit codes: 0 success, 2 config error, 3 input error,
4 backend failure, 5 golden mismatch.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import analytics, corpus, pipeline, reporting
from .config import RunConfig, load_config
from .errors import (
    BackendError,
    ConfigError,
    EmptyMatrix,
    GoldenMismatch,
    HttpFailure,
    MissingInput,
    QuotaExceeded,
    RateLimited,
    ReplayMiss,
    SdgPbError,
    TemplateVersionMismatch,
    Timeout,
)
from .gateway import Gateway, LiveBackend, RecordingBackend, ReplayBackend, CACHE_SUBDIR, CACHE_FILE
from .taxonomy import load_catalog
from .testing import ScriptedBackend

EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_BACKEND = 4
EXIT_GOLDEN = 5

_BACKEND_ERRORS = (BackendError, RateLimited, Timeout, ReplayMiss, HttpFailure, QuotaExceeded)
_INPUT_ERRORS = (MissingInput, EmptyMatrix, TemplateVersionMismatch, FileNotFoundError)


class JsonEventFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return json.dumps(
            {
                "level": record.levelname,
                "logger": record.name,
                "event": record.getMessage(),
            },
            sort_keys=True,
        )


def _setup_logging(verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonEventFormatter())
    root = logging.getLogger()
    root.handlers = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def _fail(code: int, kind: str, message: str) -> None:
    click.echo(json.dumps({"error": kind, "message": message}, sort_keys=True), err=True)
    sys.exit(code)


def handles_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_CONFIG, "ConfigError", str(exc))
        except GoldenMismatch as exc:
            _fail(EXIT_GOLDEN, "GoldenMismatch", str(exc))
        except _BACKEND_ERRORS as exc:
            _fail(EXIT_BACKEND, type(exc).__name__, str(exc))
        except _INPUT_ERRORS as exc:
            _fail(EXIT_INPUT, type(exc).__name__, str(exc))
        except SdgPbError as exc:
            _fail(EXIT_INPUT, type(exc).__name__, str(exc))

    return wrapper


def _make_gateway(cfg: RunConfig, backend_mode: str | None = None) -> Gateway:
    mode = backend_mode or cfg.backend
    if mode == "replay":
        cache = Path(cfg.run_dir) / CACHE_SUBDIR / CACHE_FILE
        if not cache.exists():
            raise MissingInput(f"replay mode requires a recorded cache at {cache}")
        backend = ReplayBackend(cfg.run_dir)
    elif mode == "scripted":
        backend = ScriptedBackend(seed=cfg.scripted_seed)
    elif mode == "record":
        backend = RecordingBackend(ScriptedBackend(seed=cfg.scripted_seed), cfg.run_dir)
    elif mode == "record-live":
        inner = LiveBackend(cfg.endpoint_url, cfg.models["1"], cfg.api_key_env)
        backend = RecordingBackend(inner, cfg.run_dir)
    else:
        backend = LiveBackend(cfg.endpoint_url, cfg.models["1"], cfg.api_key_env)
    return Gateway(
        backend,
        rpm=cfg.rpm_limit,
        retry_budget=cfg.retry_budget,
        jitter_seed=cfg.jitter_seed,
    )


def _make_runner(cfg: RunConfig, gateway: Gateway) -> pipeline.PipelineRunner:
    return pipeline.PipelineRunner(
        gateway=gateway,
        checkpoints=pipeline.CheckpointStore(cfg.run_dir),
        catalog=load_catalog(cfg.catalog_path),
        templates=pipeline.PromptTemplates(cfg.template_dir),
        batch_cap=cfg.batch_cap,
        context_budget=cfg.context_budget,
    )


def _load_corpus(cfg: RunConfig) -> list[corpus.CleanDocument]:
    docs_path = Path(cfg.run_dir) / "documents.jsonl"
    if docs_path.exists():
        return corpus.read_documents(docs_path)
    corpus_dir = Path(cfg.corpus_dir)
    if not corpus_dir.is_dir():
        raise MissingInput(f"corpus directory not found: {corpus_dir}")
    docs = corpus.ingest_directory(corpus_dir)
    if not docs:
        raise MissingInput(f"no .tei.xml documents found in {corpus_dir}")
    return docs


def _run_and_report(cfg: RunConfig, backend_mode: str | None = None) -> Path:
    """Shared body of `run` and `resume`: process corpus, write results."""
    docs = _load_corpus(cfg)
    gateway = _make_gateway(cfg, backend_mode)
    runner = _make_runner(cfg, gateway)
    results = runner.run(docs, workers=cfg.worker_count)
    results_path = Path(cfg.run_dir) / "results" / "results.jsonl"
    pipeline.write_results(results, results_path)
    return results_path


def _aggregate(cfg: RunConfig) -> Path:
    results_path = Path(cfg.run_dir) / "results" / "results.jsonl"
    if not results_path.exists():
        raise MissingInput(f"results store not found: {results_path}")
    results = pipeline.read_results(results_path)
    records = analytics.flatten(results)
    total_docs = sum(1 for r in results if r.status == "complete")
    matrix = analytics.build_matrix(records, total_docs)
    if matrix.total_records == 0:
        raise EmptyMatrix("aggregation produced zero interaction records")
    matrix_path = Path(cfg.run_dir) / "matrix.json"
    matrix_path.write_text(
        json.dumps(analytics.matrix_to_json(matrix), sort_keys=True, indent=2) + "\n",
        "utf-8",
    )
    return matrix_path


def _report(cfg: RunConfig) -> Path:
    matrix_path = Path(cfg.run_dir) / "matrix.json"
    if not matrix_path.exists():
        raise MissingInput(f"matrix file not found: {matrix_path}; run `aggregate` first")
    matrix = analytics.matrix_from_json(json.loads(matrix_path.read_text("utf-8")))
    report_dir = Path(cfg.report_dir)
    report_dir.mkdir(parents=True, exist_ok=True)
    (report_dir / "summary.json").write_text(reporting.emit_summary_json(matrix), "utf-8")
    (report_dir / "matrix.csv").write_text(reporting.emit_matrix_csv(matrix), "utf-8")
    (report_dir / "figure1.svg").write_bytes(reporting.render_svg(reporting.figure_spec(matrix)))
    return report_dir


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Path to the JSON run configuration file.")
@click.option("--verbose", is_flag=True, help="Debug-level structured logs.")
@click.pass_context
def main(ctx, config_path, verbose):
    """SDG-PB interaction mining pipeline."""
    _setup_logging(verbose)
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


def _cfg(ctx, **overrides) -> RunConfig:
    cfg = load_config(ctx.obj.get("config_path"))
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


@main.command()
@click.option("--query", default=None, help="Full-text search query.")
@click.option("--out", "out_path", default=None, help="Manifest output path.")
@click.pass_context
@handles_errors
def fetch(ctx, query, out_path):
    """Fetch open-access work metadata and write a JSONL manifest."""
    cfg = _cfg(ctx)
    query = query or cfg.api_query
    if not query:
        raise ConfigError("no query given (use --query or api_query in config)")
    client = corpus.WorksClient(cfg.api_base_url, mailto=cfg.mailto,
                                retry_budget=cfg.retry_budget)
    records = list(client.fetch_all(query, cfg.api_filters))
    out = Path(out_path or Path(cfg.corpus_dir) / "manifest.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    corpus.write_manifest(records, out)
    click.echo(f"wrote {len(records)} work records to {out}")


@main.command()
@click.option("--corpus-dir", default=None, help="Directory of .tei.xml files.")
@click.pass_context
@handles_errors
def ingest(ctx, corpus_dir):
    """Parse and prune TEI files into the clean document store."""
    cfg = _cfg(ctx, corpus_dir=corpus_dir)
    corpus_path = Path(cfg.corpus_dir)
    if not corpus_path.is_dir():
        raise MissingInput(f"corpus directory not found: {corpus_path}")
    docs = corpus.ingest_directory(corpus_path)
    if not docs:
        raise MissingInput(f"no .tei.xml documents found in {corpus_path}")
    out = Path(cfg.run_dir) / "documents.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    corpus.write_documents(docs, out)
    click.echo(f"ingested {len(docs)} documents into {out}")


@main.command()
@click.option("--backend", default=None, type=click.Choice(["live", "record", "replay", "scripted"]))
@click.option("--batch-cap", default=None, type=int)
@click.option("--workers", "worker_count", default=None, type=int)
@click.pass_context
@handles_errors
def run(ctx, backend, batch_cap, worker_count):
    """Process the corpus through all five stages."""
    cfg = _cfg(ctx, backend=backend, batch_cap=batch_cap, worker_count=worker_count)
    results_path = _run_and_report(cfg)
    click.echo(f"wrote results to {results_path}")


@main.command()
@click.pass_context
@handles_errors
def resume(ctx):
    """Continue an interrupted run from its checkpoints."""
    cfg = _cfg(ctx)
    results_path = _run_and_report(cfg)
    click.echo(f"wrote results to {results_path}")


@main.command()
@click.pass_context
@handles_errors
def aggregate(ctx):
    """Build the interaction matrix from the results store."""
    cfg = _cfg(ctx)
    matrix_path = _aggregate(cfg)
    click.echo(f"wrote matrix to {matrix_path}")


@main.command()
@click.pass_context
@handles_errors
def report(ctx):
    """Emit summary.json, matrix.csv, and figure1.svg."""
    cfg = _cfg(ctx)
    report_dir = _report(cfg)
    click.echo(f"wrote reports to {report_dir}")


@main.command("validate-fixtures")
@click.option("--fixtures-dir", default="fixtures", help="Bundled fixture corpus root.")
@click.pass_context
@handles_errors
def validate_fixtures(ctx, fixtures_dir):
    """Replay the bundled fixture corpus and diff against golden outputs."""
    import shutil
    import tempfile

    fixtures = Path(fixtures_dir)
    if not fixtures.is_dir():
        raise MissingInput(f"fixtures directory not found: {fixtures}")
    golden = fixtures / "golden"
    with tempfile.TemporaryDirectory() as tmp:
        run_dir = Path(tmp) / "run"
        (run_dir / CACHE_SUBDIR).mkdir(parents=True)
        shutil.copy(fixtures / CACHE_SUBDIR / CACHE_FILE, run_dir / CACHE_SUBDIR / CACHE_FILE)
        cfg = _cfg(ctx)
        cfg.corpus_dir = str(fixtures / "corpus")
        cfg.run_dir = str(run_dir)
        cfg.report_dir = str(Path(tmp) / "report")
        cfg.backend = "replay"
        _run_and_report(cfg)
        _aggregate(cfg)
        report_dir = _report(cfg)
        produced = {
            "results.jsonl": run_dir / "results" / "results.jsonl",
            "matrix.json": run_dir / "matrix.json",
            "summary.json": report_dir / "summary.json",
            "matrix.csv": report_dir / "matrix.csv",
            "figure1.svg": report_dir / "figure1.svg",
        }
        for name, path in produced.items():
            expected = golden / name
            if not expected.exists():
                raise MissingInput(f"golden file missing: {expected}")
            if path.read_bytes() != expected.read_bytes():
                raise GoldenMismatch(f"{name} differs from golden {expected}")
    click.echo("all fixture outputs match goldens")


if __name__ == "__main__":
    main()
