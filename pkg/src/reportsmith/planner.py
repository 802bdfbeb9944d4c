"""Insight planning: a bounded tool-using LLM loop with a rule-based fallback.

The fallback path is a pure function of (intent, schema, profile) and ranks
candidate insights with a fixed scoring table, which is what keeps offline
runs deterministic end to end.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any

from .errors import GatewayError, InsufficientFields, PlanInvalid
from .gateway import LlmGateway
from .ingest import DatasetSchema
from .profiler import Hint, ProfileQuery, StatisticalProfile, query_profile

TASKS = ("distribution", "correlation", "ranking", "trend", "part_to_whole", "comparison", "outlier")
ROLES = ("measure", "dimension", "time", "detail")

MAX_TOOL_CALLS = 8
MAX_PLAN_RETRIES = 2

# Which field kinds may carry which role.
_ROLE_KINDS = {
    "time": {"temporal"},
    "measure": {"quantitative"},
    "dimension": {"nominal", "ordinal", "boolean", "identifier", "temporal"},
    "detail": {"quantitative", "temporal", "ordinal", "nominal", "boolean", "identifier"},
}


@dataclass(frozen=True)
class Intent:
    goal: str
    insight_count: int
    audience_note: str | None = None

    def __post_init__(self):
        if not 1 <= self.insight_count <= 12:
            raise ValueError(f"insight_count must be in 1..12, got {self.insight_count}")

    def to_dict(self) -> dict[str, Any]:
        return {"goal": self.goal, "insight_count": self.insight_count, "audience_note": self.audience_note}


@dataclass
class InsightPlan:
    insight_id: str
    title: str
    question: str
    task: str
    fields: list[tuple[str, str]]  # (field name, role)
    grounding: list[dict[str, Any]]  # {rule_id, fields, evidence}

    def to_dict(self) -> dict[str, Any]:
        return {
            "insight_id": self.insight_id,
            "title": self.title,
            "question": self.question,
            "task": self.task,
            "fields": [[name, role] for name, role in self.fields],
            "grounding": self.grounding,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "InsightPlan":
        return cls(
            insight_id=d["insight_id"],
            title=d["title"],
            question=d["question"],
            task=d["task"],
            fields=[(name, role) for name, role in d["fields"]],
            grounding=list(d["grounding"]),
        )

    def role_fields(self, role: str) -> list[str]:
        return [name for name, r in self.fields if r == role]


def slugify(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug or "field"


def validate_plan(plan: InsightPlan, schema: DatasetSchema) -> InsightPlan:
    """Check structure, field existence, and role/kind compatibility."""
    violations: list[str] = []
    kinds = {f.name: f.kind for f in schema.fields}
    if not plan.fields:
        violations.append("plan binds no fields")
    seen: set[str] = set()
    for name, role in plan.fields:
        if role not in ROLES:
            violations.append(f"unknown role '{role}' on field '{name}'")
            continue
        if name not in kinds:
            violations.append(f"field '{name}' does not exist in the schema")
            continue
        if name in seen:
            violations.append(f"field '{name}' bound more than once")
        seen.add(name)
        if kinds[name] not in _ROLE_KINDS[role]:
            violations.append(f"role '{role}' incompatible with {kinds[name]} field '{name}'")
    if plan.task not in TASKS:
        violations.append(f"unknown task '{plan.task}'")
    if not plan.grounding:
        violations.append("grounding is empty")
    if violations:
        raise PlanInvalid(violations)
    return plan


def _grounding_entry(hint: Hint) -> dict[str, Any]:
    return {"rule_id": hint.rule_id, "fields": list(hint.fields), "evidence": dict(hint.evidence)}


def _matches_seen(entry: Any, seen: set[tuple[str, tuple[str, ...]]]) -> bool:
    if isinstance(entry, dict):
        rule_id = entry.get("rule_id")
        fields = tuple(entry.get("fields", ()))
        return (rule_id, fields) in seen
    if isinstance(entry, str):
        return any(rule == entry for rule, _ in seen)
    return False


@dataclass
class _Candidate:
    task: str
    fields: list[tuple[str, str]]
    score: float
    grounding: list[dict[str, Any]]
    title: str
    question: str

    def sort_key(self):
        return (-self.score, "-".join(name for name, _ in self.fields).lower(), self.task)


def _fallback_candidates(profile: StatisticalProfile) -> list[_Candidate]:
    hints = profile.hints
    first_of = lambda kind: next((h for h in hints if h.hint_kind == kind), None)
    measure_hint = first_of("measure_candidate")
    facet_hint = first_of("facet_candidate")
    skew_by_field = {h.fields[0]: h for h in hints if h.hint_kind == "skew_alert"}
    out: list[_Candidate] = []

    for hint in hints:
        if hint.hint_kind == "trend_axis":
            t = hint.fields[0]
            if measure_hint:
                m = measure_hint.fields[0]
                out.append(
                    _Candidate(
                        task="trend",
                        fields=[(t, "time"), (m, "measure")],
                        score=15,
                        grounding=[_grounding_entry(hint), _grounding_entry(measure_hint)],
                        title=f"{m} over {t}",
                        question=f"How does {m} change across {t}?",
                    )
                )
            else:
                out.append(
                    _Candidate(
                        task="trend",
                        fields=[(t, "time")],
                        score=10,
                        grounding=[_grounding_entry(hint)],
                        title=f"Records over {t}",
                        question=f"How does the record count change across {t}?",
                    )
                )
        elif hint.hint_kind == "correlation":
            a, b = hint.fields
            fields = [(a, "measure"), (b, "measure")]
            grounding = [_grounding_entry(hint)]
            if facet_hint:
                fields.append((facet_hint.fields[0], "detail"))
                grounding.append(_grounding_entry(facet_hint))
            trend_hint = first_of("trend_axis")
            if trend_hint:
                # carried as table-only context: readers cross-filter by it
                # even though the chart never encodes it
                fields.append((trend_hint.fields[0], "detail"))
                grounding.append(_grounding_entry(trend_hint))
            out.append(
                _Candidate(
                    task="correlation",
                    fields=fields,
                    score=8 + 4 * abs(hint.evidence.get("pearson_r", 0.0)),
                    grounding=grounding,
                    title=f"{a} vs {b}",
                    question=f"How are {a} and {b} related?",
                )
            )
        elif hint.hint_kind == "facet_candidate":
            d = hint.fields[0]
            if measure_hint:
                m = measure_hint.fields[0]
                out.append(
                    _Candidate(
                        task="comparison",
                        fields=[(d, "dimension"), (m, "measure")],
                        score=8,  # 6 + 2: a facet candidate is present by construction
                        grounding=[_grounding_entry(hint), _grounding_entry(measure_hint)],
                        title=f"{m} by {d}",
                        question=f"How does {m} differ across {d} categories?",
                    )
                )
            out.append(
                _Candidate(
                    task="distribution",
                    fields=[(d, "dimension")],
                    score=4,
                    grounding=[_grounding_entry(hint)],
                    title=f"Distribution of {d}",
                    question=f"How are records distributed across {d}?",
                )
            )
        elif hint.hint_kind == "measure_candidate":
            f = hint.fields[0]
            skew = skew_by_field.get(f)
            grounding = [_grounding_entry(hint)]
            if skew:
                grounding.append(_grounding_entry(skew))
            out.append(
                _Candidate(
                    task="distribution",
                    fields=[(f, "measure")],
                    score=4 + (2 if skew else 0),
                    grounding=grounding,
                    title=f"Distribution of {f}",
                    question=f"How are values of {f} distributed?",
                )
            )
    return out


def _ranking_candidates(schema: DatasetSchema, profile: StatisticalProfile) -> list[_Candidate]:
    measure_hint = next((h for h in profile.hints if h.hint_kind == "measure_candidate"), None)
    if measure_hint is None:
        return []
    out = []
    m = measure_hint.fields[0]
    for f in schema.fields:
        if f.kind == "identifier":
            out.append(
                _Candidate(
                    task="ranking",
                    fields=[(f.name, "dimension"), (m, "measure")],
                    score=5,
                    grounding=[_grounding_entry(measure_hint)],
                    title=f"Top {f.name} by {m}",
                    question=f"Which {f.name} rank highest by {m}?",
                )
            )
    return out


def fallback_plan(intent: Intent, schema: DatasetSchema, profile: StatisticalProfile) -> list[InsightPlan]:
    """Deterministic planning from the profile's hints alone.

    Raises InsufficientFields when not even one grounded candidate exists.
    Returns fewer than insight_count plans when candidates run out; the
    orchestrator records that as a degraded stage.
    """
    candidates = _fallback_candidates(profile) + _ranking_candidates(schema, profile)
    candidates.sort(key=_Candidate.sort_key)

    plans: list[InsightPlan] = []
    seen_keys: set[tuple[str, tuple[tuple[str, str], ...]]] = set()
    used_ids: set[str] = set()
    for cand in candidates:
        key = (cand.task, tuple(cand.fields))
        if key in seen_keys:
            continue
        seen_keys.add(key)
        insight_id = f"{cand.task}-" + slugify("-".join(name for name, _ in cand.fields))
        if insight_id in used_ids:
            bump = 2
            while f"{insight_id}-{bump}" in used_ids:
                bump += 1
            insight_id = f"{insight_id}-{bump}"
        used_ids.add(insight_id)
        plan = InsightPlan(
            insight_id=insight_id,
            title=cand.title,
            question=cand.question,
            task=cand.task,
            fields=cand.fields,
            grounding=cand.grounding,
        )
        try:
            validate_plan(plan, schema)
        except PlanInvalid:
            continue
        plans.append(plan)
        if len(plans) == intent.insight_count:
            break
    if not plans:
        raise InsufficientFields("no grounded insight candidate can be formed from this profile")
    return plans


def _planner_payload(intent: Intent, schema: DatasetSchema, profile: StatisticalProfile) -> dict[str, Any]:
    return {
        "goal": intent.goal,
        "insight_count": intent.insight_count,
        "audience_note": intent.audience_note,
        "fields": [{"name": f.name, "kind": f.kind} for f in schema.fields],
        "hints": [h.to_dict() for h in profile.hints],
        "tasks": list(TASKS),
        "tools": ["field_summary", "facet_candidates", "top_correlations", "temporal_fields", "distinct_values"],
    }


def _assign_plan_ids(raw_plans: list[InsightPlan]) -> None:
    used: set[str] = set()
    for plan in raw_plans:
        base = plan.insight_id or f"{plan.task}-" + slugify("-".join(n for n, _ in plan.fields))
        candidate = base
        bump = 2
        while candidate in used:
            candidate = f"{base}-{bump}"
            bump += 1
        plan.insight_id = candidate
        used.add(candidate)


def plan_insights(
    intent: Intent,
    schema: DatasetSchema,
    profile: StatisticalProfile,
    llm: LlmGateway | None,
    tracer=None,
) -> tuple[list[InsightPlan], bool]:
    """Produce validated plans; returns (plans, degraded_to_fallback).

    The LLM session may issue up to 8 profile tool calls and gets 2 retries
    with validator feedback; any failure after that falls back to the
    deterministic planner.
    """
    if llm is None:
        return fallback_plan(intent, schema, profile), True

    seen_hints: set[tuple[str, tuple[str, ...]]] = {(h.rule_id, h.fields) for h in profile.hints}
    payload = _planner_payload(intent, schema, profile)
    transcript: list[dict[str, Any]] = []
    tool_calls_used = 0
    retries = 0

    while True:
        request_payload = {"prompt": payload, "transcript": transcript}
        try:
            response = llm.complete_role("planner", request_payload, schema_id="planner_step")
        except GatewayError:
            return fallback_plan(intent, schema, profile), True

        value = response.parsed
        if "tool_calls" in value:
            if tool_calls_used + len(value["tool_calls"]) > MAX_TOOL_CALLS:
                return fallback_plan(intent, schema, profile), True
            for call in value["tool_calls"]:
                tool_calls_used += 1
                query = ProfileQuery(
                    kind=call["kind"],
                    field=call.get("field"),
                    n=call.get("n"),
                    limit=call.get("limit"),
                )
                try:
                    if tracer is not None:
                        with tracer.span("profile-tool", attributes={"kind": query.kind, "field": query.field}):
                            answer = query_profile(profile, query)
                    else:
                        answer = query_profile(profile, query)
                except Exception as exc:
                    transcript.append({"tool": call, "error": str(exc)})
                    continue
                seen_hints.update((h.rule_id, h.fields) for h in answer.hints)
                transcript.append({"tool": call, "result": answer.to_dict()})
            continue

        raw_plans = [InsightPlan.from_dict({"insight_id": p.get("insight_id", ""), **p}) for p in value["plans"]]
        _assign_plan_ids(raw_plans)
        problems: list[str] = []
        for plan in raw_plans:
            try:
                validate_plan(plan, schema)
            except PlanInvalid as exc:
                problems.append(f"{plan.insight_id}: {exc}")
                continue
            bad = [g for g in plan.grounding if not _matches_seen(g, seen_hints)]
            if bad:
                problems.append(f"{plan.insight_id}: grounding does not match any session hint")
        if len(raw_plans) != intent.insight_count:
            problems.append(f"expected exactly {intent.insight_count} plans, got {len(raw_plans)}")
        if not problems:
            return raw_plans, False
        retries += 1
        if retries > MAX_PLAN_RETRIES:
            return fallback_plan(intent, schema, profile), True
        transcript.append({"validator_feedback": problems})
