"""Narratives, the report manifest, and the dual output.

Every number a narrative states must be backed by a stat citation; the check
is mechanical and rejecting, so no unsourced figure can reach a reader. The
HTML bundle is fully static: report data is inlined into index.html because
browsers refuse fetch() over file://, while the standalone report.json,
charts/ and data/ files remain the machine-readable surface.
"""

from __future__ import annotations

import html
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from .deriver import DerivedDataset
from .errors import EmptyReport, GatewayError
from .gateway import LlmGateway
from .planner import InsightPlan, Intent
from .profiler import FieldProfile
from .publisher import ArtifactRef, ObjectStore, content_key, load_parquet_artifact, put_report_asset
from .vizrec import CompleteSpec, PartialSpec

REPORT_VERSION = "1"
EMBED_ROW_CAP = 10_000

# Digits embedded in identifier-ish words (p25, col_2) are not "numbers".
_NUMBER_RE = re.compile(r"(?<![\w.])\d+(?:\.\d+)?(?!\w)")


def fmt_stat(value: Any) -> str:
    """Canonical rendering for any number a narrative may cite."""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value == int(value) and abs(value) < 1e15:
            return str(int(value))
        text = f"{value:.3f}".rstrip("0").rstrip(".")
        return text if text not in ("", "-") else "0"
    return str(value)


@dataclass
class Narrative:
    insight_id: str
    title: str
    body_markdown: str
    stat_citations: list[tuple[str, Any]]

    def to_dict(self) -> dict[str, Any]:
        return {
            "insight_id": self.insight_id,
            "title": self.title,
            "body_markdown": self.body_markdown,
            "stat_citations": [[n, v] for n, v in self.stat_citations],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Narrative":
        return cls(
            insight_id=d["insight_id"],
            title=d["title"],
            body_markdown=d["body_markdown"],
            stat_citations=[(n, v) for n, v in d["stat_citations"]],
        )


def unsourced_numbers(body: str, citations: Sequence[tuple[str, Any]]) -> list[str]:
    """Number tokens in the body with no matching citation value."""
    cited = {fmt_stat(v) for _, v in citations}
    return [tok for tok in _NUMBER_RE.findall(body) if tok not in cited]


def _profile_by_role(plan: InsightPlan, derived: DerivedDataset, role: str) -> FieldProfile | None:
    for name, r in derived.final_query.roles.items():
        if r == role:
            for fp in derived.mini_profile:
                if fp.name == name:
                    return fp
    return None


def _grounding_stat(plan: InsightPlan, stat: str) -> float | None:
    for entry in plan.grounding:
        if isinstance(entry, dict):
            value = entry.get("evidence", {}).get(stat)
            if value is not None:
                return value
    return None


def template_narrative(plan: InsightPlan, derived: DerivedDataset) -> Narrative:
    """Deterministic per-task narration filled from the mini-profile."""
    measure = _profile_by_role(plan, derived, "measure")
    time_fp = _profile_by_role(plan, derived, "time")
    dimension = _profile_by_role(plan, derived, "dimension")
    cite: list[tuple[str, Any]] = []

    def c(name: str, value: Any) -> str:
        cite.append((name, value))
        return fmt_stat(value)

    task = plan.task
    body = ""
    if task == "trend" and measure is not None and time_fp is not None:
        body = (
            f"{measure.name} ranges from {c('min', measure.min)} to {c('max', measure.max)} "
            f"across {c('periods', time_fp.distinct_count)} {time_fp.name} periods, "
            f"averaging {c('mean', round(measure.mean, 3) if measure.mean is not None else 0)}."
        )
    elif task == "correlation":
        measures = [fp for fp in derived.mini_profile if derived.final_query.roles.get(fp.name) == "measure"]
        if len(measures) >= 2:
            a, b = measures[0], measures[1]
            r = _grounding_stat(plan, "pearson_r")
            parts = []
            if r is not None:
                parts.append(
                    f"In the source data, {a.name} and {b.name} show a Pearson correlation of {c('pearson_r', round(r, 3))}."
                )
            parts.append(
                f"Here {a.name} spans {c(f'{a.name} min', a.min)} to {c(f'{a.name} max', a.max)} "
                f"and {b.name} spans {c(f'{b.name} min', b.min)} to {c(f'{b.name} max', b.max)} "
                f"over {c('rows', derived.row_count)} rows."
            )
            body = " ".join(parts)
    elif task == "comparison" and measure is not None and dimension is not None:
        body = (
            f"{measure.name} varies across {c('groups', dimension.distinct_count)} {dimension.name} groups, "
            f"from {c('min', round(measure.min, 3) if measure.min is not None else 0)} "
            f"to {c('max', round(measure.max, 3) if measure.max is not None else 0)}."
        )
    elif task == "ranking" and measure is not None and dimension is not None:
        body = (
            f"The top {c('rows', derived.row_count)} {dimension.name} by {measure.name} "
            f"range from {c('min', measure.min)} to {c('max', measure.max)}."
        )
    elif task == "part_to_whole" and dimension is not None and measure is not None:
        body = (
            f"{c('groups', dimension.distinct_count)} {dimension.name} categories split the data; "
            f"the largest share is {c('largest_share', round(measure.max, 3) if measure.max is not None else 0)}."
        )
    elif task == "outlier" and measure is not None:
        dev = next((fp for fp in derived.mini_profile if fp.name == "abs_dev"), None)
        top = dev.max if dev is not None and dev.max is not None else (measure.max or 0)
        body = (
            f"The strongest outliers of {measure.name} deviate by up to "
            f"{c('max_abs_dev', round(top, 3))} from the mean."
        )

    if not body:
        # degenerate plans still get a sourced sentence
        first = derived.mini_profile[0]
        body = (
            f"{first.name} takes {c('distinct', first.distinct_count)} distinct values "
            f"over {c('rows', derived.row_count)} rows."
        )
    return Narrative(insight_id=plan.insight_id, title=plan.title, body_markdown=body, stat_citations=cite)


def narrate_insight(
    plan: InsightPlan,
    derived: DerivedDataset,
    spec: CompleteSpec,
    llm: LlmGateway | None,
) -> Narrative:
    """Model-written narration when available; template otherwise.

    Model output violating the citation invariant is rejected and regenerated
    from the template.
    """
    if llm is not None:
        try:
            response = llm.complete_role(
                "narrator",
                {
                    "question": plan.question,
                    "task": plan.task,
                    "mini_profile": [fp.to_dict() for fp in derived.mini_profile],
                    "chart": {"mark": spec.mark, "encodings": [e.to_dict() for e in spec.encodings]},
                },
                schema_id="narrative",
            )
            body = response.parsed["body_markdown"]
            citations = [(str(n), v) for n, v in response.parsed["stat_citations"]]
            if not unsourced_numbers(body, citations):
                return Narrative(
                    insight_id=plan.insight_id,
                    title=plan.title,
                    body_markdown=body,
                    stat_citations=citations,
                )
        except GatewayError:
            pass
    narrative = template_narrative(plan, derived)
    leftovers = unsourced_numbers(narrative.body_markdown, narrative.stat_citations)
    if leftovers:
        raise AssertionError(f"template narrative broke the citation invariant: {leftovers}")
    return narrative


# --- report manifest ---------------------------------------------------------


@dataclass
class InsightBundle:
    """Everything one completed insight contributes to the report."""

    plan: InsightPlan
    derived: DerivedDataset
    partial: PartialSpec
    spec: CompleteSpec
    chart_ref: ArtifactRef
    narrative: Narrative
    derive_span_id: str = ""


@dataclass
class SkippedInsight:
    insight_id: str
    reason: str
    attempted_sql: list[str] = field(default_factory=list)
    plan: InsightPlan | None = None


def compose_report(
    intent: Intent,
    run_id: str,
    bundles: Sequence[InsightBundle],
    skipped: Sequence[SkippedInsight],
) -> dict[str, Any]:
    """Assemble the granular report manifest (plan order, stable keys)."""
    if not bundles:
        raise EmptyReport("every insight was skipped; nothing to report")
    insights = []
    for b in bundles:
        insights.append(
            {
                "insight_id": b.plan.insight_id,
                "title": b.plan.title,
                "question": b.plan.question,
                "task": b.plan.task,
                "narrative": b.narrative.to_dict(),
                "chart_ref": {"digest": b.chart_ref.digest, "store_key": b.chart_ref.store_key},
                "data_ref": {"digest": b.derived.artifact.digest, "store_key": b.derived.artifact.store_key},
                "sql": b.derived.final_query.sql,
                "row_count": b.derived.row_count,
                "provenance": {
                    "plan_digest": content_key(json.dumps(b.plan.to_dict(), sort_keys=True).encode("utf-8")),
                    "query_digest": content_key(b.derived.final_query.sql.encode("utf-8")),
                    "spec_digest": content_key(
                        json.dumps(b.spec.to_dict(), sort_keys=True).encode("utf-8")
                    ),
                    "trace_span_id": b.derive_span_id,
                },
            }
        )
    manifest = {
        "version": REPORT_VERSION,
        "run_id": run_id,
        "title": intent.goal,
        "goal": intent.goal,
        "preamble": f"This report addresses the goal: {intent.goal}",
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "insights": insights,
        "skipped": [{"insight_id": s.insight_id, "reason": s.reason} for s in skipped],
    }
    return manifest


def manifest_bytes(manifest: dict[str, Any]) -> bytes:
    return (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode("utf-8")


# --- bundle emission ------------------------------------------------------------


def embedded_data_payload(derived: DerivedDataset, store: ObjectStore) -> dict[str, Any]:
    """Row arrays for the viewer, capped at the embed limit."""
    frame = load_parquet_artifact(derived.artifact, store)
    total = frame.height
    truncated = total > EMBED_ROW_CAP
    if truncated:
        frame = frame.head(EMBED_ROW_CAP)
    return {
        "insight_id": derived.insight_id,
        "fields": [{"name": n, "kind": k} for n, k in derived.result_schema],
        "rows": [list(row) for row in frame.rows()],
        "row_count": total,
        "truncated": truncated,
    }


def _inline_json(value: Any) -> str:
    # "</script>" inside strings would close the tag early
    return json.dumps(value, sort_keys=True).replace("</", "<\\/")


def _static_fallback_html(manifest: dict[str, Any]) -> str:
    sections = []
    for entry in manifest["insights"]:
        sections.append(
            "<section class=\"insight\">"
            f"<h2>{html.escape(entry['title'])}</h2>"
            f"<p>{html.escape(entry['narrative']['body_markdown'])}</p>"
            f"<pre><code>{html.escape(entry['sql'])}</code></pre>"
            "</section>"
        )
    for entry in manifest["skipped"]:
        sections.append(
            "<section class=\"insight skipped\">"
            f"<h2>{html.escape(entry['insight_id'])} (skipped)</h2>"
            f"<p>{html.escape(entry['reason'])}</p>"
            "</section>"
        )
    return "\n".join(sections)


_INDEX_TEMPLATE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>{title}</title>
<style>
body {{ font-family: system-ui, sans-serif; margin: 2rem auto; max-width: 60rem; padding: 0 1rem; color: #1a202c; }}
h1 {{ font-size: 1.6rem; }} h2 {{ font-size: 1.2rem; margin-top: 2rem; }}
pre {{ background: #f7fafc; border: 1px solid #e2e8f0; padding: .75rem; overflow-x: auto; font-size: .85rem; }}
.skipped {{ color: #718096; }}
</style>
</head>
<body>
<h1>{title}</h1>
<p>{preamble}</p>
<div id="app">
{fallback}
</div>
<script>window.__REPORT__ = {payload};</script>
{viewer_tag}
</body>
</html>
"""


def render_index_html(
    manifest: dict[str, Any],
    charts: dict[str, dict[str, Any]],
    data: dict[str, dict[str, Any]],
    viewer_js: str | None,
) -> str:
    payload = {"report": manifest, "charts": charts, "data": data}
    viewer_tag = f"<script>\n{viewer_js}\n</script>" if viewer_js else ""
    return _INDEX_TEMPLATE.format(
        title=html.escape(manifest["title"]),
        preamble=html.escape(manifest["preamble"]),
        fallback=_static_fallback_html(manifest),
        payload=_inline_json(payload),
        viewer_tag=viewer_tag,
    )


def packaged_viewer_js() -> str | None:
    path = Path(__file__).parent / "assets" / "viewer" / "viewer.js"
    if path.exists():
        return path.read_text(encoding="utf-8")
    return None


def emit_html(
    manifest: dict[str, Any],
    bundles: Sequence[InsightBundle],
    store: ObjectStore,
    bundle_dir: str | Path,
    viewer_js: str | None = None,
) -> list[ArtifactRef]:
    """Write the static bundle; returns refs for every emitted member."""
    bundle_dir = Path(bundle_dir)
    (bundle_dir / "charts").mkdir(parents=True, exist_ok=True)
    (bundle_dir / "data").mkdir(parents=True, exist_ok=True)
    refs: list[ArtifactRef] = []

    charts_payload: dict[str, dict[str, Any]] = {}
    data_payload: dict[str, dict[str, Any]] = {}
    for b in bundles:
        chart_bytes = store.get(b.chart_ref.store_key)
        charts_payload[b.plan.insight_id] = json.loads(chart_bytes)
        (bundle_dir / "charts" / f"{b.plan.insight_id}.json").write_bytes(chart_bytes)
        payload = embedded_data_payload(b.derived, store)
        data_payload[b.plan.insight_id] = payload
        data_bytes = (json.dumps(payload, sort_keys=True) + "\n").encode("utf-8")
        (bundle_dir / "data" / f"{b.plan.insight_id}.json").write_bytes(data_bytes)
        refs.append(put_report_asset(data_bytes, "html_bundle_member", f"data/{b.plan.insight_id}.json", store))

    report_bytes = manifest_bytes(manifest)
    (bundle_dir / "report.json").write_bytes(report_bytes)
    refs.append(put_report_asset(report_bytes, "report_manifest", "report.json", store))

    index_text = render_index_html(manifest, charts_payload, data_payload, viewer_js)
    index_bytes = index_text.encode("utf-8")
    (bundle_dir / "index.html").write_bytes(index_bytes)
    refs.append(put_report_asset(index_bytes, "html_bundle_member", "index.html", store))
    return refs


# --- trace documents --------------------------------------------------------------


def _decision_log_lines(spec: CompleteSpec) -> list[str]:
    lines = ["| rank | cost | mark | reasons |", "| --- | --- | --- | --- |"]
    for entry in spec.decision_log:
        reasons = ", ".join(entry.get("reasons", [])) or "-"
        lines.append(f"| {entry['rank']} | {entry['cost']} | {entry['mark']} | {reasons} |")
    return lines


def emit_trace_doc(bundle: InsightBundle, store: ObjectStore, bundle_dir: str | Path) -> ArtifactRef:
    """Analyst-facing markdown: everything needed to re-run one insight by hand."""
    plan = bundle.plan
    lines = [
        f"# Insight trace: {plan.insight_id}",
        "",
        "## Question",
        "",
        plan.question,
        "",
        "## Grounding hints",
        "",
    ]
    for entry in plan.grounding:
        lines.append(f"- `{json.dumps(entry, sort_keys=True)}`")
    lines += [
        "",
        "## SQL",
        "",
        "```sql",
        bundle.derived.final_query.sql,
        "```",
        "",
        "## Result schema",
        "",
    ]
    for name, kind in bundle.derived.result_schema:
        lines.append(f"- {name}: {kind}")
    lines += ["", "## Solver decision log", ""]
    lines += _decision_log_lines(bundle.spec)
    lines += [
        "",
        "## Final spec",
        "",
        "```json",
        json.dumps({"mark": bundle.spec.mark, "encodings": [e.to_dict() for e in bundle.spec.encodings]}, sort_keys=True, indent=2),
        "```",
        "",
        "## Narrative",
        "",
        bundle.narrative.body_markdown,
        "",
    ]
    doc = "\n".join(lines).encode("utf-8")
    path = Path(bundle_dir) / "traces" / f"{plan.insight_id}.md"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(doc)
    return put_report_asset(doc, "trace_doc", f"traces/{plan.insight_id}.md", store)


def emit_skip_trace_doc(skip: SkippedInsight, store: ObjectStore, bundle_dir: str | Path) -> ArtifactRef:
    lines = [
        f"# Insight trace: {skip.insight_id} (skipped)",
        "",
        "## Question",
        "",
        skip.plan.question if skip.plan else "(plan unavailable)",
        "",
        "## Error",
        "",
        skip.reason,
        "",
        "## Attempted SQL versions",
        "",
    ]
    for idx, sql in enumerate(skip.attempted_sql):
        lines += [f"### Attempt {idx}", "", "```sql", sql, "```", ""]
    doc = "\n".join(lines).encode("utf-8")
    path = Path(bundle_dir) / "traces" / f"{skip.insight_id}.md"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(doc)
    return put_report_asset(doc, "trace_doc", f"traces/{skip.insight_id}.md", store)
