"""Single choke point for model calls: routing, validation, backends.

Every agent role resolves through one routing table (the "right-size"
strategy: cheap models by default, the powerful tier only for SQL drafting
and narration). The stub backend answers from on-disk fixtures keyed by a
canonical prompt digest, which is what makes offline runs bit-deterministic.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema
import requests

from .errors import HttpError, NoFixture, SchemaViolation, UnknownRole
from .publisher import content_key
from .tracing import Tracer

AGENT_ROLES = ("describer", "expander", "planner", "deriver", "repairer", "narrator")
DEFAULT_POWERFUL_ROLES = ("deriver", "narrator")

ENV_ENDPOINT = "REPORTSMITH_LLM_ENDPOINT"
ENV_KEY = "REPORTSMITH_LLM_KEY"

_ROLE_TAXONOMY = {"enum": ["measure", "dimension", "time", "detail"]}
_PLAN_SCHEMA = {
    "type": "object",
    "required": ["title", "question", "task", "fields", "grounding"],
    "properties": {
        "insight_id": {"type": "string"},
        "title": {"type": "string", "minLength": 1},
        "question": {"type": "string", "minLength": 1},
        "task": {
            "enum": ["distribution", "correlation", "ranking", "trend", "part_to_whole", "comparison", "outlier"]
        },
        "fields": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "array",
                "prefixItems": [{"type": "string"}, _ROLE_TAXONOMY],
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "grounding": {"type": "array", "minItems": 1},
    },
}

SCHEMAS: dict[str, dict[str, Any]] = {
    "dataset_description": {"type": "string", "minLength": 1},
    "code_expansion": {"type": "object", "additionalProperties": {"type": "string"}},
    "planner_step": {
        "type": "object",
        "properties": {
            "tool_calls": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["kind"],
                    "properties": {
                        "kind": {"type": "string"},
                        "field": {"type": ["string", "null"]},
                        "n": {"type": ["integer", "null"]},
                        "limit": {"type": ["integer", "null"]},
                    },
                },
            },
            "plans": {"type": "array", "items": _PLAN_SCHEMA},
        },
        "oneOf": [{"required": ["tool_calls"]}, {"required": ["plans"]}],
    },
    "sql_candidate": {
        "type": "object",
        "required": ["sql", "roles"],
        "properties": {
            "sql": {"type": "string", "minLength": 1},
            "roles": {"type": "object", "additionalProperties": _ROLE_TAXONOMY},
        },
    },
    "narrative": {
        "type": "object",
        "required": ["body_markdown", "stat_citations"],
        "properties": {
            "body_markdown": {"type": "string", "minLength": 1},
            "stat_citations": {
                "type": "array",
                "items": {"type": "array", "minItems": 2, "maxItems": 2},
            },
        },
    },
}


@dataclass(frozen=True)
class ModelRoute:
    agent_role: str
    tier: str
    model_id: str
    max_tokens: int
    temperature: float = 0.0


@dataclass
class GatewayRequest:
    role: str
    payload: Any  # JSON-serializable prompt parts
    schema_id: str
    image_b64: str | None = None


@dataclass
class GatewayResponse:
    raw_text: str
    parsed: Any
    usage: dict[str, int]
    backend: str
    model_id: str
    latency_ms: float = 0.0


class RoutingTable:
    def __init__(self, routes: dict[str, ModelRoute]):
        missing = [r for r in AGENT_ROLES if r not in routes]
        if missing:
            raise UnknownRole(f"routing table lacks roles: {', '.join(missing)}")
        self.routes = routes

    @classmethod
    def load(cls, path: str | Path) -> "RoutingTable":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        routes = {}
        for role, entry in raw.items():
            routes[role] = ModelRoute(
                agent_role=role,
                tier=entry["tier"],
                model_id=entry["model_id"],
                max_tokens=int(entry.get("max_tokens", 1024)),
                temperature=float(entry.get("temperature", 0)),
            )
        return cls(routes)

    @classmethod
    def default(cls) -> "RoutingTable":
        return cls.load(Path(__file__).parent / "assets" / "models.json")

    def route(self, agent_role: str) -> ModelRoute:
        try:
            return self.routes[agent_role]
        except KeyError:
            raise UnknownRole(agent_role) from None


def canonical_prompt(payload: Any) -> str:
    """Whitespace-collapsed, key-sorted serialization used for fixture keys."""

    def collapse(value: Any) -> Any:
        if isinstance(value, str):
            return re.sub(r"\s+", " ", value).strip()
        if isinstance(value, dict):
            return {k: collapse(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [collapse(v) for v in value]
        return value

    return json.dumps(collapse(payload), sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def prompt_digest(payload: Any) -> str:
    return content_key(canonical_prompt(payload).encode("utf-8"))


def validate_output(schema_id: str, value: Any) -> None:
    schema = SCHEMAS.get(schema_id)
    if schema is None:
        raise SchemaViolation(f"unknown output schema id: {schema_id}")
    try:
        jsonschema.validate(value, schema)
    except jsonschema.ValidationError as exc:
        raise SchemaViolation(f"{schema_id}: {exc.message}") from exc


class StubBackend:
    """Deterministic fixture lookup; zero network.

    Fixture layout: ``<root>/<role>/<prompt-digest>.json`` holding the model's
    structured output verbatim.
    """

    name = "stub"

    def __init__(self, fixtures_root: str | Path | None = None):
        self.root = Path(fixtures_root) if fixtures_root else None

    def fixture_path(self, role: str, payload: Any) -> Path | None:
        if self.root is None:
            return None
        return self.root / role / f"{prompt_digest(payload)}.json"

    def complete(self, request: GatewayRequest, route: ModelRoute) -> GatewayResponse:
        path = self.fixture_path(request.role, request.payload)
        if path is None or not path.exists():
            raise NoFixture(f"no fixture for role={request.role} digest={prompt_digest(request.payload)}")
        raw = path.read_text(encoding="utf-8")
        parsed = json.loads(raw)
        validate_output(request.schema_id, parsed)
        return GatewayResponse(
            raw_text=raw,
            parsed=parsed,
            usage={"prompt_tokens": 0, "completion_tokens": 0},
            backend=self.name,
            model_id=route.model_id,
            latency_ms=0.0,
        )


def write_fixture(root: str | Path, role: str, payload: Any, value: Any) -> Path:
    """Helper for tests/demos: place a fixture where the stub will find it."""
    path = Path(root) / role / f"{prompt_digest(payload)}.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(value, sort_keys=True, indent=2), encoding="utf-8")
    return path


class HttpBackend:
    """OpenAI-compatible chat-completions client.

    Schema-invalid output is retried once with the validator message appended
    to the prompt; a second violation raises SchemaViolation.
    """

    name = "http"

    def __init__(self, endpoint: str | None = None, api_key: str | None = None, timeout: float = 60.0):
        self.endpoint = endpoint or os.environ.get(ENV_ENDPOINT, "")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_KEY, "")
        self.timeout = timeout
        if not self.endpoint:
            raise HttpError(f"no endpoint configured (set {ENV_ENDPOINT})")

    def _post(self, request: GatewayRequest, route: ModelRoute, extra_note: str | None) -> tuple[str, dict]:
        content: Any = canonical_prompt(request.payload)
        if extra_note:
            content = content + "\n" + extra_note
        if request.image_b64:
            content = [
                {"type": "text", "text": content},
                {"type": "image_url", "image_url": {"url": f"data:image/png;base64,{request.image_b64}"}},
            ]
        body = {
            "model": route.model_id,
            "temperature": route.temperature,
            "max_tokens": route.max_tokens,
            "messages": [
                {
                    "role": "system",
                    "content": (
                        f"You are the {request.role} agent of a data reporting pipeline. "
                        f"Reply with a single JSON value matching the '{request.schema_id}' schema. No prose."
                    ),
                },
                {"role": "user", "content": content},
            ],
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(self.endpoint, json=body, headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise HttpError(str(exc)) from exc
        if resp.status_code != 200:
            raise HttpError(f"status {resp.status_code}: {resp.text[:500]}")
        data = resp.json()
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise HttpError(f"malformed completion response: {exc}") from exc
        return text, data.get("usage", {})

    @staticmethod
    def _extract_json(text: str) -> Any:
        text = text.strip()
        fenced = re.search(r"```(?:json)?\s*(.*?)```", text, re.DOTALL)
        if fenced:
            text = fenced.group(1).strip()
        return json.loads(text)

    def complete(self, request: GatewayRequest, route: ModelRoute) -> GatewayResponse:
        note = None
        last_error = ""
        for _ in range(2):
            started = time.monotonic()
            text, usage = self._post(request, route, note)
            latency = (time.monotonic() - started) * 1000.0
            try:
                parsed = self._extract_json(text)
                validate_output(request.schema_id, parsed)
            except (json.JSONDecodeError, SchemaViolation) as exc:
                last_error = str(exc)
                note = f"Previous reply was invalid ({last_error}). Reply with valid JSON only."
                continue
            return GatewayResponse(
                raw_text=text,
                parsed=parsed,
                usage={
                    "prompt_tokens": int(usage.get("prompt_tokens", 0)),
                    "completion_tokens": int(usage.get("completion_tokens", 0)),
                },
                backend=self.name,
                model_id=route.model_id,
                latency_ms=latency,
            )
        raise SchemaViolation(f"{request.schema_id} still invalid after retry: {last_error}")


def record_usage(response: GatewayResponse, span) -> None:
    """Attach usage counters and routing facts to the calling span."""
    span.attributes.update(
        {
            "backend": response.backend,
            "model_id": response.model_id,
            "prompt_tokens": response.usage.get("prompt_tokens", 0),
            "completion_tokens": response.usage.get("completion_tokens", 0),
            "latency_ms": round(response.latency_ms, 3),
        }
    )


class LlmGateway:
    """Facade the pipeline stages call; owns routing, tracing, and the backend.

    A global in-flight cap bounds concurrent backend calls so parallel insight
    chains cannot stampede a rate-limited endpoint.
    """

    def __init__(self, routing: RoutingTable, backend, tracer: Tracer | None = None, max_in_flight: int = 4):
        self.routing = routing
        self.backend = backend
        self.tracer = tracer
        self._slots = threading.Semaphore(max_in_flight)

    def route(self, agent_role: str) -> ModelRoute:
        return self.routing.route(agent_role)

    def _call_backend(self, request: GatewayRequest, route: ModelRoute) -> GatewayResponse:
        with self._slots:
            return self.backend.complete(request, route)

    def complete(self, request: GatewayRequest) -> GatewayResponse:
        route = self.routing.route(request.role)
        if self.tracer is None:
            return self._call_backend(request, route)
        with self.tracer.span("llm-call", agent_role=request.role) as span:
            span.attributes["prompt_digest"] = prompt_digest(request.payload)
            try:
                response = self._call_backend(request, route)
            except NoFixture as exc:
                # expected in offline mode: callers fall back deterministically
                span.status = "degraded"
                span.attributes["error"] = str(exc)
                raise
            except Exception as exc:
                span.attributes["error"] = str(exc)
                raise
            record_usage(response, span)
            return response

    def complete_role(self, role: str, payload: Any, schema_id: str, image_b64: str | None = None) -> GatewayResponse:
        return self.complete(GatewayRequest(role=role, payload=payload, schema_id=schema_id, image_b64=image_b64))
