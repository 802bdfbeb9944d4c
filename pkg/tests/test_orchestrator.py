from __future__ import annotations

import json
from pathlib import Path

import pytest

from conftest import make_config
from reportsmith import orchestrator
from reportsmith.deriver import SqlEngine
from reportsmith.errors import UnknownNode
from reportsmith.gateway import write_fixture
from reportsmith.orchestrator import (
    CONFIG_NODES,
    PIPELINE_STAGES,
    STAGE_DAG,
    StageCache,
    StageKey,
    invalidate,
    run_pipeline,
)
from reportsmith.planner import Intent, fallback_plan
from reportsmith.tracing import load_spans, validate_span_tree


def _spans(manifest):
    return load_spans(manifest.trace_path)


def _executed(manifest):
    return [s for s in manifest.stages if s["cache"] in ("miss", "off")]


# --- stage keys / cache -----------------------------------------------------------


def test_stage_key_digest_sensitivity():
    base = StageKey("derive", ("a", "b"), "cfg", "1")
    assert base.digest() == StageKey("derive", ("b", "a"), "cfg", "1").digest()  # sorted inputs
    assert base.digest() != StageKey("derive", ("a",), "cfg", "1").digest()
    assert base.digest() != StageKey("derive", ("a", "b"), "cfg2", "1").digest()
    assert base.digest() != StageKey("derive", ("a", "b"), "cfg", "2").digest()
    assert base.digest() != StageKey("solve", ("a", "b"), "cfg", "1").digest()


def test_stage_cache_roundtrip(tmp_path):
    cache = StageCache(tmp_path)
    assert cache.get("k") is None
    cache.put("k", {"record": {"x": 1}, "status": "ok"})
    assert cache.get("k") == {"record": {"x": 1}, "status": "ok"}
    disabled = StageCache(tmp_path, enabled=False)
    assert disabled.get("k") is None


# --- DAG / invalidate ----------------------------------------------------------------


def test_invalidate_viz_knowledge_hits_solve_and_downstream():
    assert invalidate(None, "viz_knowledge.json") == {"solve", "narrate", "compose", "emit"}


def test_invalidate_dataset_hits_everything():
    assert invalidate(None, "dataset") == set(PIPELINE_STAGES)


def test_invalidate_rules_hits_profile_downstream():
    assert invalidate(None, "rules.json") == {"profile", "plan", "derive", "materialize", "solve", "narrate", "compose", "emit"}


def test_invalidate_stage_node_returns_descendants():
    assert invalidate(None, "narrate") == {"compose", "emit"}
    assert invalidate(None, "emit") == set()


def test_invalidate_unknown_node():
    with pytest.raises(UnknownNode):
        invalidate(None, "nonsense.json")


def test_dag_exported_matches_code(run_config):
    run_pipeline(run_config)
    doc = json.loads((Path(run_config.out_dir) / "dag.json").read_text())
    assert doc["stages"] == {k: list(v) for k, v in STAGE_DAG.items()}
    assert doc["config_nodes"] == {k: list(v) for k, v in CONFIG_NODES.items()}


# --- full runs --------------------------------------------------------------------------


def test_full_run_structure(run_config):
    manifest = run_pipeline(run_config)
    stages = [s["stage"] for s in manifest.stages]
    assert stages.count("ingest") == 1
    assert stages.count("derive") == 3
    assert stages.count("emit") == 1
    assert len(manifest.stages) == 17
    report = json.loads((Path(manifest.bundle_dir) / "report.json").read_text())
    assert len(report["insights"]) == 3
    assert report["skipped"] == []


def test_span_tree_single_rooted(run_config):
    manifest = run_pipeline(run_config)
    spans = _spans(manifest)
    root = validate_span_tree(spans)
    assert root.stage_name == "run"
    stage_spans = [s for s in spans if s.stage_name in PIPELINE_STAGES]
    assert len(stage_spans) == len(manifest.stages)
    assert all(s.status in ("ok", "degraded") for s in stage_spans)


def test_second_run_all_cache_hits(run_config):
    run_pipeline(run_config)
    second = run_pipeline(run_config)
    hits = [s for s in second.stages if s["cache"] == "hit"]
    assert len(hits) == 15  # everything except compose/emit
    executed = _executed(second)
    assert sorted(s["stage"] for s in executed) == ["compose", "emit"]
    assert not any(s["stage"] in ("derive", "solve") for s in executed)


def test_no_cache_flag_disables_hits(run_config):
    run_pipeline(run_config)
    run_config.use_cache = False
    second = run_pipeline(run_config)
    assert all(s["cache"] == "off" for s in second.stages)


def test_cache_soundness_disabled_equals_enabled(run_config):
    first = run_pipeline(run_config)
    run_config.use_cache = False
    uncached = run_pipeline(run_config)
    by_key_first = {(s["stage"], s.get("insight_id")): s["output_digest"] for s in first.stages}
    by_key_second = {(s["stage"], s.get("insight_id")): s["output_digest"] for s in uncached.stages}
    for key in by_key_first:
        if key[0] in ("compose", "emit"):
            continue  # embed run-scoped fields by design
        assert by_key_first[key] == by_key_second[key], key


def test_parallel_run_matches_sequential_outputs(sample_path, tmp_path):
    sequential = run_pipeline(make_config(sample_path, str(tmp_path / "a"), workers=1))
    parallel = run_pipeline(make_config(sample_path, str(tmp_path / "b"), workers=4))
    spans = _spans(parallel)
    validate_span_tree(spans)
    seq_digests = {(s["stage"], s.get("insight_id")): s["output_digest"] for s in sequential.stages if s["stage"] not in ("compose", "emit")}
    par_digests = {(s["stage"], s.get("insight_id")): s["output_digest"] for s in parallel.stages if s["stage"] not in ("compose", "emit")}
    assert seq_digests == par_digests


def test_plan_stage_degraded_in_stub_mode(run_config):
    manifest = run_pipeline(run_config)
    plan_stage = [s for s in manifest.stages if s["stage"] == "plan"][0]
    assert plan_stage["status"] == "degraded"  # fallback planning is recorded


def test_knowledge_dir_expands_award_codes(sample_path, tmp_path):
    import reportsmith

    knowledge_dir = Path(reportsmith.__file__).parent / "assets" / "knowledge"
    config = make_config(sample_path, str(tmp_path / "out"), knowledge_dir=str(knowledge_dir))
    manifest = run_pipeline(config)
    # the ingest cache record holds the refined schema with the dictionary
    ingest_stage = [s for s in manifest.stages if s["stage"] == "ingest"][0]
    cache = StageCache(Path(config.out_dir) / "cache")
    record = cache.get(ingest_stage["key"])["record"]
    award = [f for f in record["schema"]["fields"] if f["name"] == "Award"][0]
    assert award["code_dictionary"]["BP"] == "Best Paper Award"
    assert award["code_dictionary"]["C"] == "Conference Paper"


# --- hostile fixture: skipped insight --------------------------------------------------


def _hostile_fixture_dir(tmp_path, sample_parts, target_index=1):
    schema, _, profile = sample_parts
    plans = fallback_plan(Intent(goal="Summarize publication impact trends", insight_count=3), schema, profile)
    target = plans[target_index]
    payload = {
        "plan": target.to_dict(),
        "relation": "data",
        "fields": [{"name": f.name, "kind": f.kind} for f in schema.fields],
        "dialect": "ANSI SELECT with GROUP BY, CTEs, window functions",
    }
    fixtures = tmp_path / "fixtures"
    write_fixture(fixtures, "deriver", payload, {"sql": "SELECT Nonsense FROM data", "roles": {"Nonsense": "measure"}})
    return fixtures, target.insight_id


def test_hostile_sql_fixture_skips_one_insight(sample_path, sample_parts, tmp_path):
    fixtures, hostile_id = _hostile_fixture_dir(tmp_path, sample_parts)
    config = make_config(sample_path, str(tmp_path / "out"), fixtures_dir=str(fixtures))
    manifest = run_pipeline(config)
    report = json.loads((Path(manifest.bundle_dir) / "report.json").read_text())
    assert len(report["insights"]) == 2
    assert [s["insight_id"] for s in report["skipped"]] == [hostile_id]
    derive_stage = [s for s in manifest.stages if s["stage"] == "derive" and s["insight_id"] == hostile_id][0]
    assert derive_stage["status"] == "degraded"
    # skipped chain halts: no materialize/solve/narrate for the hostile insight
    assert not any(
        s["stage"] in ("materialize", "solve", "narrate") and s["insight_id"] == hostile_id for s in manifest.stages
    )
    # the trace doc records the failure and attempted SQL
    trace_doc = Path(manifest.bundle_dir) / "traces" / f"{hostile_id}.md"
    assert "SELECT Nonsense FROM data" in trace_doc.read_text()


# --- surgical replan ----------------------------------------------------------------------


def test_replan_executes_exactly_six_stages(run_config):
    first = run_pipeline(run_config)
    report = json.loads((Path(first.bundle_dir) / "report.json").read_text())
    target = report["insights"][1]["insight_id"]
    cache = StageCache(Path(run_config.out_dir) / "cache")
    plan_record = cache.get([s for s in first.stages if s["stage"] == "plan"][0]["key"])
    original = [p for p in plan_record["record"]["plans"] if p["insight_id"] == target][0]
    modified = dict(original)
    modified["question"] = "What changed after editing this plan?"

    second = orchestrator.replan(run_config.out_dir, first.run_id, target, modified)
    executed = _executed(second)
    assert len(executed) == 6
    assert sorted((s["stage"], s.get("insight_id")) for s in executed) == sorted(
        [
            ("derive", target),
            ("materialize", target),
            ("solve", target),
            ("narrate", target),
            ("compose", None),
            ("emit", None),
        ]
    )
    hits = [s for s in second.stages if s["cache"] == "hit"]
    assert len(hits) == 11
    new_report = json.loads((Path(second.bundle_dir) / "report.json").read_text())
    assert new_report["insights"][1]["question"] == "What changed after editing this plan?"


def test_replan_unknown_insight_rejected(run_config):
    first = run_pipeline(run_config)
    with pytest.raises(UnknownNode):
        orchestrator.replan(run_config.out_dir, first.run_id, "no-such-insight", {"insight_id": "x", "title": "t", "question": "q", "task": "trend", "fields": [["Year", "time"]], "grounding": [{"rule_id": "trend.v1", "fields": ["Year"]}]})


def test_render_reemits_from_cache(run_config):
    first = run_pipeline(run_config)
    rendered = orchestrator.render(run_config.out_dir, first.run_id)
    executed = _executed(rendered)
    assert sorted(s["stage"] for s in executed) == ["compose", "emit"]
    assert (Path(rendered.bundle_dir) / "index.html").exists()


# --- manifest completeness ------------------------------------------------------------------


def test_every_artifact_listed_once(run_config):
    manifest = run_pipeline(run_config)
    keys = [(a["digest"], a["logical_name"]) for a in manifest.artifacts]
    assert len(keys) == len(set(keys))
    kinds = {a["kind"] for a in manifest.artifacts}
    assert {"derived_parquet", "chart_json", "report_manifest", "trace_doc", "html_bundle_member"} <= kinds
    store_root = Path(run_config.out_dir)
    for a in manifest.artifacts:
        assert (store_root / a["store_key"]).exists(), a["store_key"]


def test_rules_edit_cascades_misses_downstream(sample_path, tmp_path):
    import reportsmith

    config = make_config(sample_path, str(tmp_path / "out"))
    run_pipeline(config)

    default_rules = Path(reportsmith.__file__).parent / "assets" / "rules.json"
    doc = json.loads(default_rules.read_text())
    for rule in doc:
        if rule["rule_id"] == "facet.v1":
            rule["params"]["min_normalized_entropy"] = 0.05
    edited = tmp_path / "rules.json"
    edited.write_text(json.dumps(doc))
    config.rules_path = str(edited)

    second = run_pipeline(config)
    by_stage = {}
    for s in second.stages:
        by_stage.setdefault(s["stage"], []).append(s["cache"])
    assert by_stage["ingest"] == ["hit"]  # rules do not feed ingest
    assert by_stage["profile"] == ["miss"]
    assert by_stage["plan"] == ["miss"]
    for stage in ("derive", "materialize", "solve", "narrate"):
        assert all(c == "miss" for c in by_stage[stage]), stage


def test_all_insights_skipped_is_fatal_empty_report(sample_path, sample_parts, tmp_path):
    from reportsmith.errors import EmptyReport
    from reportsmith.planner import Intent, fallback_plan

    schema, _, profile = sample_parts
    plans = fallback_plan(Intent(goal="Summarize publication impact trends", insight_count=3), schema, profile)
    fixtures = tmp_path / "fixtures"
    for plan in plans:
        payload = {
            "plan": plan.to_dict(),
            "relation": "data",
            "fields": [{"name": f.name, "kind": f.kind} for f in schema.fields],
            "dialect": "ANSI SELECT with GROUP BY, CTEs, window functions",
        }
        write_fixture(fixtures, "deriver", payload, {"sql": "SELECT Gibberish FROM data", "roles": {"Gibberish": "measure"}})
    config = make_config(sample_path, str(tmp_path / "out"), fixtures_dir=str(fixtures))
    with pytest.raises(EmptyReport):
        run_pipeline(config)


def test_failed_repairs_are_error_spans(sample_path, sample_parts, tmp_path):
    fixtures, hostile_id = _hostile_fixture_dir(tmp_path, sample_parts)
    config = make_config(sample_path, str(tmp_path / "out"), fixtures_dir=str(fixtures))
    manifest = run_pipeline(config)
    spans = load_spans(manifest.trace_path)
    repair_spans = [
        s for s in spans if s.stage_name == "repair" and f"/derive/{hostile_id}/" in s.span_id
    ]
    assert len(repair_spans) == 3
    assert all(s.status == "error" for s in repair_spans)
    assert all(s.attributes.get("unresolved_error") for s in repair_spans)


def test_parallel_run_report_is_byte_identical(sample_path, tmp_path):
    import re

    def masked(manifest):
        report = (Path(manifest.bundle_dir) / "report.json").read_text()
        report = report.replace(manifest.run_id, "R")
        return re.sub(r'"generated_at": "[^"]*"', '"generated_at": "M"', report)

    sequential = run_pipeline(make_config(sample_path, str(tmp_path / "a"), workers=1))
    parallel = run_pipeline(make_config(sample_path, str(tmp_path / "b"), workers=4))
    assert masked(sequential) == masked(parallel)


def test_candidate_scarcity_degrades_plan_stage(sample_path, tmp_path):
    manifest = run_pipeline(make_config(sample_path, str(tmp_path / "out"), insight_count=12))
    plan_stage = [s for s in manifest.stages if s["stage"] == "plan"][0]
    assert plan_stage["status"] == "degraded"
    report = json.loads((Path(manifest.bundle_dir) / "report.json").read_text())
    assert 1 <= len(report["insights"]) < 12


def test_parquet_dataset_input(sample_path, tmp_path):
    import polars as pl

    parquet_path = tmp_path / "sample.parquet"
    pl.read_csv(sample_path).write_parquet(parquet_path)
    csv_run = run_pipeline(make_config(sample_path, str(tmp_path / "a")))
    parquet_run = run_pipeline(make_config(str(parquet_path), str(tmp_path / "b")))
    report_csv = json.loads((Path(csv_run.bundle_dir) / "report.json").read_text())
    report_parquet = json.loads((Path(parquet_run.bundle_dir) / "report.json").read_text())
    assert [i["insight_id"] for i in report_csv["insights"]] == [i["insight_id"] for i in report_parquet["insights"]]
