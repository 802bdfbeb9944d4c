"""Stage coordination: content-keyed caching, the stage DAG, and full runs.

Stage keys hash the *content* of a stage's inputs, not upstream identities,
so editing one insight's plan re-executes only that insight's chain plus the
report stages (the surgical-regeneration property). compose and emit always
execute: they are cheap and embed run-scoped fields.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from contextvars import copy_context
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

from . import deriver, planner, reporter, vizrec
from .config import PipelineConfig
from .errors import InsufficientFields, KnowledgeSourceUnavailable, UnknownNode
from .gateway import HttpBackend, LlmGateway, RoutingTable, StubBackend
from .ingest import (
    DatasetSchema,
    DirectoryKnowledgeSource,
    TypedTable,
    apply_schema,
    describe_dataset,
    distinct_sample,
    expand_codes,
    load_dataset,
    refine_fields,
)
from .profiler import HintRuleSet, StatisticalProfile, profile_table
from .publisher import (
    ArtifactRef,
    FilesystemStore,
    content_key,
    load_parquet_artifact,
    materialize,
    put_report_asset,
)
from .tracing import Tracer
from .vizrec import load_viz_knowledge

PIPELINE_STAGES = ("ingest", "profile", "plan", "derive", "materialize", "solve", "narrate", "compose", "emit")

# Code versions feed every stage key; bump on behavioral change to invalidate
# stale caches across upgrades.
STAGE_CODE_VERSIONS = {
    "ingest": "1",
    "profile": "1",
    "plan": "1",
    "derive": "1",
    "materialize": "1",
    "solve": "1",
    "narrate": "1",
    "compose": "1",
    "emit": "1",
}

# Static stage DAG; exported as dag.json so docs and invalidate() share it.
STAGE_DAG: dict[str, list[str]] = {
    "ingest": ["profile", "plan", "derive", "materialize"],
    "profile": ["plan"],
    "plan": ["derive", "solve", "narrate", "compose"],
    "derive": ["materialize"],
    "materialize": ["solve", "narrate", "compose"],
    "solve": ["narrate", "compose"],
    "narrate": ["compose"],
    "compose": ["emit"],
    "emit": [],
}

CONFIG_NODES: dict[str, list[str]] = {
    "dataset": ["ingest"],
    "rules.json": ["profile"],
    "intent": ["plan"],
    "viz_knowledge.json": ["solve"],
    "models.json": ["ingest", "plan", "derive", "narrate"],
}


def export_dag(path: str | Path) -> None:
    doc = {"stages": STAGE_DAG, "config_nodes": CONFIG_NODES}
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def invalidate(run_manifest: dict[str, Any] | None, changed_node: str) -> set[str]:
    """Stage names downstream of a change (config file or stage name)."""
    if changed_node in CONFIG_NODES:
        seeds = list(CONFIG_NODES[changed_node])
        include_seeds = True
    elif changed_node in STAGE_DAG:
        seeds = STAGE_DAG[changed_node]
        include_seeds = True
    else:
        raise UnknownNode(changed_node)
    out: set[str] = set(seeds) if include_seeds else set()
    frontier = list(seeds)
    while frontier:
        node = frontier.pop()
        for child in STAGE_DAG[node]:
            if child not in out:
                out.add(child)
                frontier.append(child)
    return out


# --- stage cache ------------------------------------------------------------------


@dataclass(frozen=True)
class StageKey:
    stage_name: str
    input_digests: tuple[str, ...]
    config_digest: str
    code_version: str

    def digest(self) -> str:
        payload = json.dumps(
            {
                "stage_name": self.stage_name,
                "input_digests": sorted(self.input_digests),
                "config_digest": self.config_digest,
                "code_version": self.code_version,
            },
            sort_keys=True,
        )
        return content_key(payload.encode("utf-8"))


class StageCache:
    def __init__(self, root: str | Path, enabled: bool = True):
        self.root = Path(root)
        self.enabled = enabled
        self.root.mkdir(parents=True, exist_ok=True)

    def get(self, key: str) -> dict[str, Any] | None:
        if not self.enabled:
            return None
        path = self.root / f"{key}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, key: str, record: dict[str, Any]) -> None:
        path = self.root / f"{key}.json"
        tmp = path.with_suffix(f".tmp-{uuid.uuid4().hex[:8]}")
        tmp.write_text(json.dumps(record, sort_keys=True), encoding="utf-8")
        tmp.replace(path)


def record_digest(record: dict[str, Any]) -> str:
    return content_key(json.dumps(record, sort_keys=True).encode("utf-8"))


# --- run manifest --------------------------------------------------------------------


@dataclass
class RunManifest:
    run_id: str
    created_at: str
    config: dict[str, Any]
    stages: list[dict[str, Any]] = field(default_factory=list)
    artifacts: list[dict[str, Any]] = field(default_factory=list)
    report_ref: dict[str, Any] | None = None
    bundle_dir: str = ""
    trace_path: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "created_at": self.created_at,
            "config": self.config,
            "stages": self.stages,
            "artifacts": self.artifacts,
            "report_ref": self.report_ref,
            "bundle_dir": self.bundle_dir,
            "trace_path": self.trace_path,
        }

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        manifest = cls(
            run_id=d["run_id"],
            created_at=d["created_at"],
            config=d["config"],
            stages=d["stages"],
            artifacts=d["artifacts"],
            report_ref=d.get("report_ref"),
            bundle_dir=d.get("bundle_dir", ""),
            trace_path=d.get("trace_path", ""),
        )
        return manifest


class _ArtifactRegistry:
    def __init__(self):
        self._lock = threading.Lock()
        self._seen: dict[tuple[str, str], dict[str, Any]] = {}

    def add(self, ref: ArtifactRef) -> ArtifactRef:
        with self._lock:
            self._seen.setdefault((ref.digest, ref.logical_name), ref.to_dict())
        return ref

    def as_list(self) -> list[dict[str, Any]]:
        return [self._seen[k] for k in sorted(self._seen)]


def _tree_digest(root: str | Path | None) -> str:
    """Stable digest over a directory tree's file names and contents."""
    if root is None:
        return "none"
    root = Path(root)
    if not root.is_dir():
        return "missing"
    parts = []
    for path in sorted(root.rglob("*")):
        if path.is_file():
            parts.append(path.relative_to(root).as_posix())
            parts.append(content_key(path.read_bytes()))
    return content_key("\n".join(parts).encode("utf-8"))


def _file_digest(path: str | Path | None, default_name: str) -> str:
    if path is None:
        path = Path(__file__).parent / "assets" / default_name
    return content_key(Path(path).read_bytes())


# --- the runner ------------------------------------------------------------------------


class PipelineRun:
    """One pipeline execution; owns the tracer, store, cache, and gateway."""

    def __init__(self, config: PipelineConfig, run_id: str | None = None):
        self.config = config
        self.out_root = Path(config.out_dir)
        self.out_root.mkdir(parents=True, exist_ok=True)
        stamp = datetime.now(timezone.utc).strftime("%Y%m%d-%H%M%S")
        self.run_id = run_id or f"run-{stamp}-{uuid.uuid4().hex[:8]}"
        self.bundle_dir = self.out_root / self.run_id
        self.store = FilesystemStore(self.out_root)
        self.cache = StageCache(self.out_root / "cache", enabled=config.use_cache)
        self.tracer = Tracer(self.run_id, self.out_root / "traces" / f"{self.run_id}.jsonl")
        self.registry = _ArtifactRegistry()
        self.routing = RoutingTable.load(config.models_path) if config.models_path else RoutingTable.default()
        if config.llm_backend == "http":
            backend = HttpBackend()
        else:
            backend = StubBackend(config.fixtures_dir)
        self.gateway = LlmGateway(self.routing, backend, self.tracer)
        self.rules = HintRuleSet.load(config.rules_path) if config.rules_path else HintRuleSet.default()
        self.viz_knowledge = load_viz_knowledge(config.viz_knowledge_path)
        self.knowledge = DirectoryKnowledgeSource(config.knowledge_dir) if config.knowledge_dir else None
        self.manifest = RunManifest(
            run_id=self.run_id,
            created_at=datetime.now(timezone.utc).isoformat(),
            config=config.to_dict(),
            bundle_dir=str(self.bundle_dir),
            trace_path=str(self.out_root / "traces" / f"{self.run_id}.jsonl"),
        )
        self._stage_lock = threading.Lock()

        self._llm_digest = content_key(
            json.dumps(
                {
                    "backend": config.llm_backend,
                    "models": _file_digest(config.models_path, "models.json"),
                    "fixtures": _tree_digest(config.fixtures_dir),
                },
                sort_keys=True,
            ).encode("utf-8")
        )
        self._rules_digest = _file_digest(config.rules_path, "rules.json")
        self._viz_digest = _file_digest(config.viz_knowledge_path, "viz_knowledge.json")

    # -- generic stage execution --

    def run_stage(
        self,
        stage_name: str,
        input_digests: list[str],
        config_digest: str,
        compute: Callable[[], tuple[dict[str, Any], str]],
        span_id: str | None = None,
        insight_id: str | None = None,
        cacheable: bool = True,
    ) -> dict[str, Any]:
        """Execute or replay one stage; returns its JSON record.

        ``compute`` returns (record, status). Records must round-trip through
        JSON: the hit path rehydrates from exactly what the miss path stored.
        """
        key = StageKey(
            stage_name=stage_name,
            input_digests=tuple(input_digests),
            config_digest=config_digest,
            code_version=STAGE_CODE_VERSIONS[stage_name],
        ).digest()
        attributes: dict[str, Any] = {}
        if insight_id is not None:
            attributes["insight_id"] = insight_id
        caching = cacheable and self.cache.enabled
        with self.tracer.span(stage_name, span_id=span_id, input_digest=key, attributes=attributes) as span:
            cached = self.cache.get(key) if caching else None
            if cached is not None:
                span.attributes["cache"] = "hit"
                record = cached["record"]
                status = cached.get("status", "ok")
            else:
                span.attributes["cache"] = "miss" if caching else "off"
                record, status = compute()
                if caching:
                    self.cache.put(key, {"record": record, "status": status})
            span.status = status
            span.output_digest = record_digest(record)
            with self._stage_lock:
                self.manifest.stages.append(
                    {
                        "stage": stage_name,
                        "insight_id": insight_id,
                        "key": key,
                        "cache": span.attributes["cache"],
                        "status": status,
                        "output_digest": span.output_digest,
                    }
                )
            return record


def _typed_table_from_frame(frame) -> TypedTable:
    columns = [(name, frame.get_column(name).to_list()) for name in frame.columns]
    return TypedTable(columns=columns, row_count=frame.height)


def run_pipeline(config: PipelineConfig, run_id: str | None = None) -> RunManifest:
    """Execute the full stage DAG for one run and write its manifest."""
    run = PipelineRun(config, run_id=run_id)
    started = time.monotonic()
    export_dag(run.out_root / "dag.json")

    with run.tracer.span("run", span_id=run.run_id):
        # -- ingest ---------------------------------------------------------
        raw_bytes = Path(config.data_uri).read_bytes() if Path(config.data_uri).exists() else b""
        ingest_cfg = content_key(
            json.dumps(
                {
                    "sentinels": list(config.null_sentinels),
                    "knowledge": _tree_digest(config.knowledge_dir),
                    "llm": run._llm_digest,
                },
                sort_keys=True,
            ).encode("utf-8")
        )

        def compute_ingest() -> tuple[dict[str, Any], str]:
            table = load_dataset(config.data_uri)
            fields = refine_fields(table, config.null_sentinels)
            status = "ok"
            warnings: list[str] = []
            if run.knowledge is not None:
                expanded = []
                for f in fields:
                    if f.kind in ("nominal", "ordinal"):
                        samples = distinct_sample(dict(table.columns)[f.name])
                        try:
                            f = expand_codes(f, samples, run.knowledge)
                        except KnowledgeSourceUnavailable as exc:
                            warnings.append(str(exc))
                            status = "degraded"
                    expanded.append(f)
                fields = expanded
            typed = apply_schema(table, fields, config.null_sentinels)
            sample_rows = [list(row) for row in typed.rows()[:5]]
            schema = describe_dataset(fields, sample_rows, run.gateway, typed.row_count)
            table_ref = materialize(
                typed.rows(),
                [(f.name, f.kind) for f in schema.fields],
                run.store,
                logical_name="refined.parquet",
            )
            run.registry.add(table_ref)
            record = {
                "schema": schema.to_dict(),
                "table_ref": table_ref.to_dict(),
                "warnings": warnings,
            }
            return record, status

        ingest_record = run.run_stage(
            "ingest",
            input_digests=[content_key(raw_bytes)],
            config_digest=ingest_cfg,
            compute=compute_ingest,
            span_id=f"{run.run_id}/ingest",
        )
        schema = DatasetSchema.from_dict(ingest_record["schema"])
        table_ref = ArtifactRef.from_dict(ingest_record["table_ref"])
        run.registry.add(table_ref)
        typed = _typed_table_from_frame(load_parquet_artifact(table_ref, run.store))
        ingest_digest = record_digest(ingest_record)

        # -- profile ---------------------------------------------------------
        def compute_profile() -> tuple[dict[str, Any], str]:
            profile = profile_table(typed, schema, run.rules)
            return {"profile": profile.to_dict()}, "ok"

        profile_record = run.run_stage(
            "profile",
            input_digests=[ingest_digest],
            config_digest=run._rules_digest,
            compute=compute_profile,
            span_id=f"{run.run_id}/profile",
        )
        profile = StatisticalProfile.from_dict(profile_record["profile"])
        profile_digest = record_digest(profile_record)

        # -- plan -------------------------------------------------------------
        intent = planner.Intent(goal=config.goal, insight_count=config.insight_count, audience_note=config.audience_note)
        intent_digest = content_key(json.dumps(intent.to_dict(), sort_keys=True).encode("utf-8"))

        def compute_plan() -> tuple[dict[str, Any], str]:
            try:
                plans, degraded = planner.plan_insights(intent, schema, profile, run.gateway, run.tracer)
            except InsufficientFields:
                raise
            status = "ok"
            warning = None
            if degraded:
                status = "degraded"
            if len(plans) < intent.insight_count:
                status = "degraded"
                warning = f"only {len(plans)} of {intent.insight_count} requested insights could be planned"
            record = {"plans": [p.to_dict() for p in plans], "fallback": degraded, "warning": warning}
            return record, status

        # ancestor configs ride along in downstream keys so a config edit
        # re-executes its whole DAG cone even when intermediate content is
        # coincidentally unchanged
        plan_record = run.run_stage(
            "plan",
            input_digests=[ingest_digest, profile_digest],
            config_digest=content_key(
                json.dumps(
                    {"intent": intent_digest, "llm": run._llm_digest, "rules": run._rules_digest},
                    sort_keys=True,
                ).encode("utf-8")
            ),
            compute=compute_plan,
            span_id=f"{run.run_id}/plan",
        )
        plans = [planner.InsightPlan.from_dict(p) for p in plan_record["plans"]]

        # replan support: overrides replace individual plans after the plan
        # stage, so per-insight keys see only their own plan's content.
        for idx, plan in enumerate(plans):
            override = config.plan_overrides.get(plan.insight_id)
            if override is not None:
                replacement = planner.InsightPlan.from_dict(override)
                planner.validate_plan(replacement, schema)
                plans[idx] = replacement
        unapplied = set(config.plan_overrides) - {p.insight_id for p in plans}
        if unapplied:
            raise UnknownNode(f"plan overrides reference unknown insights: {sorted(unapplied)}")

        # -- per-insight chains -------------------------------------------------
        results: list[tuple[reporter.InsightBundle | None, reporter.SkippedInsight | None]] = [
            (None, None)
        ] * len(plans)

        def insight_chain(idx: int, plan: planner.InsightPlan) -> None:
            plan_digest = content_key(json.dumps(plan.to_dict(), sort_keys=True).encode("utf-8"))
            iid = plan.insight_id
            derive_span = f"{run.run_id}/derive/{iid}"

            def compute_derive() -> tuple[dict[str, Any], str]:
                engine = deriver.SqlEngine(typed, schema)
                try:
                    candidate, validation, attempts = deriver.finalize_query(
                        plan, schema, engine, run.gateway, config.max_repair_attempts, run.tracer
                    )
                finally:
                    engine.close()
                if not validation.ok:
                    record = {
                        "status": "skipped",
                        "error": validation.error_message or "validation failed",
                        "attempts": attempts,
                        "final_query": candidate.to_dict(),
                    }
                    return record, "degraded"
                record = {
                    "status": "ok",
                    "final_query": candidate.to_dict(),
                    "attempts": attempts,
                    "validation": validation.to_dict(),
                }
                return record, "ok"

            derive_record = run.run_stage(
                "derive",
                input_digests=[ingest_digest, plan_digest],
                config_digest=content_key(
                    json.dumps(
                        {
                            "llm": run._llm_digest,
                            "max_attempts": config.max_repair_attempts,
                            "rules": run._rules_digest,
                        },
                        sort_keys=True,
                    ).encode("utf-8")
                ),
                compute=compute_derive,
                span_id=derive_span,
                insight_id=iid,
            )
            if derive_record["status"] == "skipped":
                results[idx] = (
                    None,
                    reporter.SkippedInsight(
                        insight_id=iid,
                        reason=derive_record["error"],
                        attempted_sql=derive_record["attempts"],
                        plan=plan,
                    ),
                )
                return
            derive_digest = record_digest(derive_record)
            final_query = deriver.CandidateQuery.from_dict(derive_record["final_query"])

            def compute_materialize() -> tuple[dict[str, Any], str]:
                engine = deriver.SqlEngine(typed, schema)
                try:
                    derived = deriver.execute_final(iid, final_query, engine, schema, run.store)
                finally:
                    engine.close()
                run.registry.add(derived.artifact)
                return {"derived": derived.to_dict()}, "ok"

            materialize_record = run.run_stage(
                "materialize",
                # plan_digest keeps the whole insight chain keyed on its plan:
                # editing a plan re-executes exactly these four stages
                input_digests=[ingest_digest, derive_digest, plan_digest],
                config_digest=run._rules_digest,
                compute=compute_materialize,
                span_id=f"{run.run_id}/materialize/{iid}",
                insight_id=iid,
            )
            derived = deriver.DerivedDataset.from_dict(materialize_record["derived"])
            run.registry.add(derived.artifact)
            materialize_digest = record_digest(materialize_record)

            def compute_solve() -> tuple[dict[str, Any], str]:
                partial = vizrec.build_partial_spec(derived, plan)
                spec = vizrec.solve(partial, run.viz_knowledge)
                doc = vizrec.to_render_doc(spec, derived.artifact, partial, run.viz_knowledge)
                chart_ref = put_report_asset(doc, "chart_json", f"{iid}.chart.json", run.store)
                run.registry.add(chart_ref)
                return {
                    "partial": partial.to_dict(),
                    "spec": spec.to_dict(),
                    "chart_ref": chart_ref.to_dict(),
                }, "ok"

            solve_record = run.run_stage(
                "solve",
                input_digests=[materialize_digest, plan_digest],
                config_digest=content_key(
                    json.dumps({"viz": run._viz_digest, "rules": run._rules_digest}, sort_keys=True).encode("utf-8")
                ),
                compute=compute_solve,
                span_id=f"{run.run_id}/solve/{iid}",
                insight_id=iid,
            )
            partial = vizrec.PartialSpec.from_dict(solve_record["partial"])
            spec = vizrec.CompleteSpec.from_dict(solve_record["spec"])
            chart_ref = ArtifactRef.from_dict(solve_record["chart_ref"])
            run.registry.add(chart_ref)
            solve_digest = record_digest(solve_record)

            def compute_narrate() -> tuple[dict[str, Any], str]:
                narrative = reporter.narrate_insight(plan, derived, spec, run.gateway)
                return {"narrative": narrative.to_dict()}, "ok"

            narrate_record = run.run_stage(
                "narrate",
                input_digests=[materialize_digest, solve_digest, plan_digest],
                config_digest=content_key(
                    json.dumps(
                        {"llm": run._llm_digest, "viz": run._viz_digest, "rules": run._rules_digest},
                        sort_keys=True,
                    ).encode("utf-8")
                ),
                compute=compute_narrate,
                span_id=f"{run.run_id}/narrate/{iid}",
                insight_id=iid,
            )
            narrative = reporter.Narrative.from_dict(narrate_record["narrative"])
            results[idx] = (
                reporter.InsightBundle(
                    plan=plan,
                    derived=derived,
                    partial=partial,
                    spec=spec,
                    chart_ref=chart_ref,
                    narrative=narrative,
                    derive_span_id=derive_span,
                ),
                None,
            )

        if config.workers > 1 and len(plans) > 1:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = []
                for idx, plan in enumerate(plans):
                    ctx = copy_context()
                    futures.append(pool.submit(ctx.run, insight_chain, idx, plan))
                for future in futures:
                    future.result()
        else:
            for idx, plan in enumerate(plans):
                insight_chain(idx, plan)

        bundles = [bundle for bundle, _ in results if bundle is not None]
        skipped = [skip for _, skip in results if skip is not None]

        # -- compose (always executes: embeds run-scoped fields) ------------------
        def compute_compose() -> tuple[dict[str, Any], str]:
            manifest = reporter.compose_report(intent, run.run_id, bundles, skipped)
            return {"manifest": manifest}, "ok" if not skipped else "degraded"

        compose_record = run.run_stage(
            "compose",
            input_digests=[],
            config_digest="-",
            compute=compute_compose,
            span_id=f"{run.run_id}/compose",
            cacheable=False,
        )
        report_manifest = compose_record["manifest"]

        # -- emit ------------------------------------------------------------------
        def compute_emit() -> tuple[dict[str, Any], str]:
            run.bundle_dir.mkdir(parents=True, exist_ok=True)
            refs = reporter.emit_html(
                report_manifest,
                bundles,
                run.store,
                run.bundle_dir,
                viewer_js=reporter.packaged_viewer_js(),
            )
            for bundle in bundles:
                refs.append(reporter.emit_trace_doc(bundle, run.store, run.bundle_dir))
            for skip in skipped:
                refs.append(reporter.emit_skip_trace_doc(skip, run.store, run.bundle_dir))
            for ref in refs:
                run.registry.add(ref)
            report_ref = next(r for r in refs if r.kind == "report_manifest")
            return {"refs": [r.to_dict() for r in refs], "report_ref": report_ref.to_dict()}, "ok"

        emit_record = run.run_stage(
            "emit",
            input_digests=[],
            config_digest="-",
            compute=compute_emit,
            span_id=f"{run.run_id}/emit",
            cacheable=False,
        )

    run.manifest.report_ref = emit_record["report_ref"]
    run.manifest.artifacts = run.registry.as_list()
    run.manifest.stages.sort(key=lambda s: (PIPELINE_STAGES.index(s["stage"]), s.get("insight_id") or ""))
    elapsed = time.monotonic() - started
    run.bundle_dir.mkdir(parents=True, exist_ok=True)
    manifest_doc = run.manifest.to_dict()
    manifest_doc["elapsed_seconds"] = round(elapsed, 3)
    (run.bundle_dir / "run.json").write_text(json.dumps(manifest_doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return run.manifest


def load_run_manifest(out_dir: str | Path, run_id: str) -> RunManifest:
    return RunManifest.load(Path(out_dir) / run_id / "run.json")


def replan(out_dir: str | Path, run_id: str, insight_id: str, plan_doc: dict[str, Any]) -> RunManifest:
    """Surgical re-run: same config, one insight's plan replaced."""
    previous = load_run_manifest(out_dir, run_id)
    config = PipelineConfig.from_dict(previous.config)
    config.plan_overrides = dict(config.plan_overrides)
    config.plan_overrides[insight_id] = plan_doc
    return run_pipeline(config)


def render(out_dir: str | Path, run_id: str) -> RunManifest:
    """Re-emit outputs only: every cached stage hits, compose/emit re-run."""
    previous = load_run_manifest(out_dir, run_id)
    config = PipelineConfig.from_dict(previous.config)
    return run_pipeline(config)
