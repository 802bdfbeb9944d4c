from __future__ import annotations

import pytest

from reportsmith.errors import InsufficientFields, PlanInvalid
from reportsmith.gateway import LlmGateway, RoutingTable, StubBackend, write_fixture
from reportsmith.ingest import DatasetSchema, FieldSchema
from reportsmith.planner import (
    InsightPlan,
    Intent,
    MAX_TOOL_CALLS,
    _planner_payload,
    fallback_plan,
    plan_insights,
    validate_plan,
)
from reportsmith.profiler import FieldProfile, Hint, PairStat, StatisticalProfile
from reportsmith.tracing import Tracer


def _schema(fields):
    return DatasetSchema(
        dataset_digest="d",
        fields=[FieldSchema(name=n, kind=k) for n, k in fields],
        description="x",
        row_count=100,
    )


def _fp(name, kind, distinct=20):
    return FieldProfile(name=name, kind=kind, count=100, null_count=0, distinct_count=distinct)


def _profile(hints, pairs=()):
    return StatisticalProfile(per_field=[], pairs=list(pairs), hints=list(hints), profile_digest="p")


TREND_HINT = Hint("trend_axis", ("Year",), {"distinct_count": 10}, "trend.v1")
MEASURE_HINT = Hint("measure_candidate", ("Downloads",), {"distinct_count": 80}, "measure.v1")
CORR_HINT = Hint("correlation", ("Downloads", "Citations"), {"pearson_r": 0.8}, "corr.v1")
SKEW_HINT = Hint("skew_alert", ("Downloads",), {"skewness": 4.0}, "skew.v1")
FACET_HINT = Hint("facet_candidate", ("Conference",), {"distinct_count": 4, "normalized_entropy": 0.99}, "facet.v1")

FULL_SCHEMA = _schema(
    [("Year", "temporal"), ("Conference", "nominal"), ("Downloads", "quantitative"), ("Citations", "quantitative")]
)


# --- validate_plan -------------------------------------------------------------


def test_measure_role_on_nominal_rejected():
    plan = InsightPlan("x", "t", "q", "comparison", [("Conference", "measure")], [{"rule_id": "facet.v1"}])
    with pytest.raises(PlanInvalid) as err:
        validate_plan(plan, FULL_SCHEMA)
    assert "incompatible" in str(err.value)


def test_wellformed_trend_plan_accepted():
    plan = InsightPlan(
        "t", "Trend", "How?", "trend", [("Year", "time"), ("Downloads", "measure")], [{"rule_id": "trend.v1", "fields": ["Year"]}]
    )
    assert validate_plan(plan, FULL_SCHEMA) is plan


def test_empty_fields_rejected():
    plan = InsightPlan("x", "t", "q", "trend", [], [{"rule_id": "trend.v1"}])
    with pytest.raises(PlanInvalid):
        validate_plan(plan, FULL_SCHEMA)


def test_unknown_field_task_and_duplicates_rejected():
    plan = InsightPlan("x", "t", "q", "sparkline", [("Ghost", "measure"), ("Year", "time"), ("Year", "time")], [])
    with pytest.raises(PlanInvalid) as err:
        validate_plan(plan, FULL_SCHEMA)
    message = str(err.value)
    assert "does not exist" in message
    assert "unknown task" in message
    assert "more than once" in message
    assert "grounding" in message


# --- fallback ranking ------------------------------------------------------------


def test_fallback_score_order_trend_correlation_distribution():
    # hand scores: trend 10+5=15; correlation 8+4*0.8=11.2; distribution 4+2=6
    profile = _profile([TREND_HINT, MEASURE_HINT, CORR_HINT, SKEW_HINT])
    plans = fallback_plan(Intent(goal="g", insight_count=3), FULL_SCHEMA, profile)
    assert [p.task for p in plans] == ["trend", "correlation", "distribution"]
    assert plans[0].fields == [("Year", "time"), ("Downloads", "measure")]
    # the temporal field rides along as table-only context for readers
    assert plans[1].fields == [("Downloads", "measure"), ("Citations", "measure"), ("Year", "detail")]


def test_fallback_comparison_score_beats_distribution():
    # comparison 8 > distribution 6 (skew-backed) > distribution 4
    profile = _profile([MEASURE_HINT, SKEW_HINT, FACET_HINT])
    plans = fallback_plan(Intent(goal="g", insight_count=2), _schema(
        [("Conference", "nominal"), ("Downloads", "quantitative")]
    ), profile)
    assert [p.task for p in plans] == ["comparison", "distribution"]


def test_fallback_includes_detail_dimension_for_correlation():
    profile = _profile([CORR_HINT, FACET_HINT, MEASURE_HINT])
    plans = fallback_plan(Intent(goal="g", insight_count=1), FULL_SCHEMA, profile)
    assert plans[0].task == "correlation"
    assert ("Conference", "detail") in plans[0].fields


def test_single_nominal_column_returns_one_distribution_plan():
    schema = _schema([("Award", "nominal")])
    profile = _profile([Hint("facet_candidate", ("Award",), {"distinct_count": 3, "normalized_entropy": 0.9}, "facet.v1")])
    plans = fallback_plan(Intent(goal="g", insight_count=3), schema, profile)
    assert len(plans) == 1
    assert plans[0].task == "distribution"
    assert plans[0].fields == [("Award", "dimension")]


def test_fallback_with_no_candidates_raises():
    schema = _schema([("Constant", "nominal")])
    with pytest.raises(InsufficientFields):
        fallback_plan(Intent(goal="g", insight_count=1), schema, _profile([]))


def test_fallback_is_deterministic():
    profile = _profile([TREND_HINT, MEASURE_HINT, CORR_HINT, SKEW_HINT, FACET_HINT])
    intent = Intent(goal="g", insight_count=4)
    a = [p.to_dict() for p in fallback_plan(intent, FULL_SCHEMA, profile)]
    b = [p.to_dict() for p in fallback_plan(intent, FULL_SCHEMA, profile)]
    assert a == b


def test_fallback_grounding_nonempty_and_matches_hints():
    profile = _profile([TREND_HINT, MEASURE_HINT, CORR_HINT, FACET_HINT])
    plans = fallback_plan(Intent(goal="g", insight_count=4), FULL_SCHEMA, profile)
    known = {(h.rule_id, tuple(h.fields)) for h in profile.hints}
    for plan in plans:
        assert plan.grounding
        for entry in plan.grounding:
            assert (entry["rule_id"], tuple(entry["fields"])) in known


def test_intent_bounds():
    with pytest.raises(ValueError):
        Intent(goal="g", insight_count=0)
    with pytest.raises(ValueError):
        Intent(goal="g", insight_count=13)


# --- plan_insights (llm loop) ------------------------------------------------------


def _gateway(tmp_path):
    return LlmGateway(RoutingTable.default(), StubBackend(tmp_path))


def _full_profile():
    return _profile([TREND_HINT, MEASURE_HINT, CORR_HINT, SKEW_HINT, FACET_HINT])


def _fixture_plan(task="trend", fields=None, grounding=None):
    return {
        "insight_id": "fixture-plan",
        "title": "Fixture",
        "question": "From fixture?",
        "task": task,
        "fields": fields or [["Year", "time"], ["Downloads", "measure"]],
        "grounding": grounding or [{"rule_id": "trend.v1", "fields": ["Year"], "evidence": {"distinct_count": 10}}],
    }


def test_stub_without_fixture_equals_fallback(tmp_path):
    intent = Intent(goal="g", insight_count=3)
    profile = _full_profile()
    got, degraded = plan_insights(intent, FULL_SCHEMA, profile, _gateway(tmp_path))
    expected = fallback_plan(intent, FULL_SCHEMA, profile)
    assert degraded is True
    assert [p.to_dict() for p in got] == [p.to_dict() for p in expected]


def test_fixture_plans_adopted_after_validation(tmp_path):
    intent = Intent(goal="g", insight_count=1)
    profile = _full_profile()
    payload = {"prompt": _planner_payload(intent, FULL_SCHEMA, profile), "transcript": []}
    write_fixture(tmp_path, "planner", payload, {"plans": [_fixture_plan()]})
    got, degraded = plan_insights(intent, FULL_SCHEMA, profile, _gateway(tmp_path))
    assert degraded is False
    assert got[0].insight_id == "fixture-plan"
    assert got[0].task == "trend"


def test_invalid_fixture_plan_falls_back(tmp_path):
    intent = Intent(goal="g", insight_count=1)
    profile = _full_profile()
    payload = {"prompt": _planner_payload(intent, FULL_SCHEMA, profile), "transcript": []}
    bad = _fixture_plan(fields=[["Ghost", "measure"]])
    write_fixture(tmp_path, "planner", payload, {"plans": [bad]})
    got, degraded = plan_insights(intent, FULL_SCHEMA, profile, _gateway(tmp_path))
    assert degraded is True
    assert [p.to_dict() for p in got] == [p.to_dict() for p in fallback_plan(intent, FULL_SCHEMA, profile)]


def test_ungrounded_fixture_plan_falls_back(tmp_path):
    intent = Intent(goal="g", insight_count=1)
    profile = _full_profile()
    payload = {"prompt": _planner_payload(intent, FULL_SCHEMA, profile), "transcript": []}
    ungrounded = _fixture_plan(grounding=[{"rule_id": "made.up", "fields": ["Year"]}])
    write_fixture(tmp_path, "planner", payload, {"plans": [ungrounded]})
    _, degraded = plan_insights(intent, FULL_SCHEMA, profile, _gateway(tmp_path))
    assert degraded is True


def test_tool_loop_then_plans(tmp_path):
    intent = Intent(goal="g", insight_count=1)
    profile = _full_profile()
    first = {"prompt": _planner_payload(intent, FULL_SCHEMA, profile), "transcript": []}
    call = {"kind": "facet_candidates"}
    write_fixture(tmp_path, "planner", first, {"tool_calls": [call]})

    from reportsmith.profiler import ProfileQuery, query_profile

    answer = query_profile(profile, ProfileQuery(kind="facet_candidates"))
    second = {
        "prompt": _planner_payload(intent, FULL_SCHEMA, profile),
        "transcript": [{"tool": call, "result": answer.to_dict()}],
    }
    write_fixture(tmp_path, "planner", second, {"plans": [_fixture_plan()]})

    tracer = Tracer("run-t", None)
    with tracer.span("plan"):
        got, degraded = plan_insights(intent, FULL_SCHEMA, profile, _gateway(tmp_path), tracer)
    assert degraded is False
    assert got[0].insight_id == "fixture-plan"
    tool_spans = [s for s in tracer.spans if s.stage_name == "profile-tool"]
    assert len(tool_spans) == 1


def test_tool_budget_enforced(tmp_path):
    intent = Intent(goal="g", insight_count=1)
    profile = _full_profile()
    calls = [{"kind": "temporal_fields"}] * (MAX_TOOL_CALLS + 1)
    payload = {"prompt": _planner_payload(intent, FULL_SCHEMA, profile), "transcript": []}
    write_fixture(tmp_path, "planner", payload, {"tool_calls": calls})
    tracer = Tracer("run-b", None)
    with tracer.span("plan"):
        _, degraded = plan_insights(intent, FULL_SCHEMA, profile, _gateway(tmp_path), tracer)
    assert degraded is True
    tool_spans = [s for s in tracer.spans if s.stage_name == "profile-tool"]
    assert len(tool_spans) <= MAX_TOOL_CALLS


def test_wrong_plan_count_falls_back(tmp_path):
    intent = Intent(goal="g", insight_count=2)
    profile = _full_profile()
    payload = {"prompt": _planner_payload(intent, FULL_SCHEMA, profile), "transcript": []}
    write_fixture(tmp_path, "planner", payload, {"plans": [_fixture_plan()]})
    _, degraded = plan_insights(intent, FULL_SCHEMA, profile, _gateway(tmp_path))
    assert degraded is True
