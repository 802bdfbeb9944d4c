"""Command line entry points.

Every flag is mirrored by a key in reportsmith.toml; explicit flags win.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import orchestrator
from .config import load_config
from .errors import ReportsmithError
from .gateway import LlmGateway, RoutingTable, StubBackend
from .ingest import apply_schema, describe_dataset, load_dataset, refine_fields
from .profiler import HintRuleSet, profile_table
from .tracing import format_span_tree, load_spans


@click.group()
def main() -> None:
    """Automated visual data reporting pipeline."""


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(1)


@main.command()
@click.option("--data", "data_uri", required=True, help="Dataset URI (csv or parquet).")
@click.option("--goal", required=True, help="High-level reporting goal.")
@click.option("--insights", "insight_count", type=int, default=None, help="Number of insights (1-12).")
@click.option("--out", "out_dir", default=None, help="Output root directory.")
@click.option("--llm", "llm_backend", type=click.Choice(["stub", "http"]), default=None)
@click.option("--rules", "rules_path", default=None, help="Hint rules file (rules.json).")
@click.option("--viz-knowledge", "viz_knowledge_path", default=None, help="Chart knowledge file.")
@click.option("--models", "models_path", default=None, help="Model routing table (models.json).")
@click.option("--fixtures", "fixtures_dir", default=None, help="Stub fixture directory.")
@click.option("--knowledge", "knowledge_dir", default=None, help="Code-expansion knowledge directory.")
@click.option("--no-cache", is_flag=True, default=False, help="Disable the stage cache.")
@click.option("--config", "config_path", default="reportsmith.toml", help="Config file path.")
def run(config_path: str, no_cache: bool, **flags) -> None:
    """Run the full pipeline and emit the report bundle."""
    config = load_config(config_path, flags)
    if no_cache:
        config.use_cache = False
    try:
        manifest = orchestrator.run_pipeline(config)
    except ReportsmithError as exc:
        _fail(exc)
        return
    click.echo(f"run: {manifest.run_id}")
    click.echo(f"bundle: {manifest.bundle_dir}")
    click.echo(f"report: {Path(manifest.bundle_dir) / 'report.json'}")


@main.command()
@click.option("--data", "data_uri", required=True, help="Dataset URI (csv or parquet).")
@click.option("--rules", "rules_path", default=None, help="Hint rules file.")
def profile(data_uri: str, rules_path: str | None) -> None:
    """Print the statistical profile of a dataset as JSON."""
    try:
        table = load_dataset(data_uri)
        fields = refine_fields(table)
        typed = apply_schema(table, fields)
        gateway = LlmGateway(RoutingTable.default(), StubBackend(None))
        schema = describe_dataset(fields, [list(r) for r in typed.rows()[:5]], gateway, typed.row_count)
        rules = HintRuleSet.load(rules_path) if rules_path else HintRuleSet.default()
        result = profile_table(typed, schema, rules)
    except ReportsmithError as exc:
        _fail(exc)
        return
    click.echo(json.dumps(result.to_dict(), sort_keys=True, indent=2))


@main.command()
@click.option("--run", "run_id", required=True, help="Run id to replan from.")
@click.option("--insight", "insight_id", required=True, help="Insight id whose plan changes.")
@click.option("--plan", "plan_path", required=True, help="Replacement plan JSON file.")
@click.option("--out", "out_dir", default="out", help="Output root directory of the original run.")
def replan(run_id: str, insight_id: str, plan_path: str, out_dir: str) -> None:
    """Surgically re-run one insight with a modified plan (cached elsewhere)."""
    try:
        plan_doc = json.loads(Path(plan_path).read_text(encoding="utf-8"))
        manifest = orchestrator.replan(out_dir, run_id, insight_id, plan_doc)
    except (ReportsmithError, OSError, json.JSONDecodeError) as exc:
        _fail(exc)
        return
    executed = [s for s in manifest.stages if s["cache"] in ("miss", "off")]
    click.echo(f"run: {manifest.run_id}")
    click.echo(f"executed stages: {len(executed)}")


@main.command()
@click.option("--run", "run_id", required=True, help="Run id to re-emit.")
@click.option("--out", "out_dir", default="out", help="Output root directory of the original run.")
def render(run_id: str, out_dir: str) -> None:
    """Re-emit report outputs from cached stages."""
    try:
        manifest = orchestrator.render(out_dir, run_id)
    except ReportsmithError as exc:
        _fail(exc)
        return
    click.echo(f"run: {manifest.run_id}")
    click.echo(f"bundle: {manifest.bundle_dir}")


@main.command()
@click.option("--run", "run_id", required=True, help="Run id to inspect.")
@click.option("--insight", "insight_id", default=None, help="Filter to one insight's spans.")
@click.option("--out", "out_dir", default="out", help="Output root directory.")
def trace(run_id: str, insight_id: str | None, out_dir: str) -> None:
    """Print the span tree of a run."""
    path = Path(out_dir) / "traces" / f"{run_id}.jsonl"
    if not path.exists():
        _fail(FileNotFoundError(f"no trace file at {path}"))
        return
    spans = load_spans(path)
    if insight_id is not None:
        keep_ids = {s.span_id for s in spans if s.attributes.get("insight_id") == insight_id}
        spans = [
            s
            for s in spans
            if s.span_id in keep_ids
            or any(s.span_id.startswith(k + "/") for k in keep_ids)
            or any(k.startswith(s.span_id + "/") for k in keep_ids)
            or s.parent_span_id is None
        ]
    click.echo(format_span_tree(spans))


if __name__ == "__main__":
    main()
