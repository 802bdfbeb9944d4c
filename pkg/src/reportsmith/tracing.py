"""Tree-structured execution traces, persisted as append-only JSONL.

Span ids are path-based (run_id/stage[/insight]) rather than random so the
same pipeline over the same inputs emits the same ids; report provenance can
then point at spans without breaking byte-level determinism checks.
"""

from __future__ import annotations

import json
import sys
import threading
import time
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

_current_span: ContextVar[str | None] = ContextVar("reportsmith_current_span", default=None)


@dataclass
class TraceSpan:
    trace_id: str
    span_id: str
    parent_span_id: str | None
    stage_name: str
    agent_role: str | None = None
    status: str = "ok"  # ok | error | degraded
    start: float = 0.0
    end: float = 0.0
    input_digest: str | None = None
    output_digest: str | None = None
    attributes: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "trace_id": self.trace_id,
            "span_id": self.span_id,
            "parent_span_id": self.parent_span_id,
            "stage_name": self.stage_name,
            "agent_role": self.agent_role,
            "status": self.status,
            "start": self.start,
            "end": self.end,
            "input_digest": self.input_digest,
            "output_digest": self.output_digest,
            "attributes": self.attributes,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TraceSpan":
        return cls(
            trace_id=d["trace_id"],
            span_id=d["span_id"],
            parent_span_id=d.get("parent_span_id"),
            stage_name=d["stage_name"],
            agent_role=d.get("agent_role"),
            status=d.get("status", "ok"),
            start=d.get("start", 0.0),
            end=d.get("end", 0.0),
            input_digest=d.get("input_digest"),
            output_digest=d.get("output_digest"),
            attributes=d.get("attributes", {}),
        )


class Tracer:
    """Per-run span recorder. Appends are atomic at span close.

    Tracing failures never fail the run; they are reported to stderr.
    """

    def __init__(self, run_id: str, path: str | Path | None):
        self.run_id = run_id
        self.path = Path(path) if path is not None else None
        self.spans: list[TraceSpan] = []
        self._lock = threading.Lock()
        self._child_counts: dict[str, int] = {}
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def current_span_id(self) -> str | None:
        return _current_span.get()

    def _record(self, span: TraceSpan) -> None:
        with self._lock:
            self.spans.append(span)
            if self.path is None:
                return
            try:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(span.to_dict(), sort_keys=True) + "\n")
            except OSError as exc:
                print(f"reportsmith: trace write failed: {exc}", file=sys.stderr)

    @contextmanager
    def span(
        self,
        stage_name: str,
        span_id: str | None = None,
        agent_role: str | None = None,
        input_digest: str | None = None,
        attributes: dict[str, Any] | None = None,
    ) -> Iterator[TraceSpan]:
        parent = _current_span.get()
        if span_id is None:
            base = parent if parent is not None else self.run_id
            counter_key = f"{base}\x00{stage_name}"
            with self._lock:
                seq = self._child_counts.get(counter_key, 0) + 1
                self._child_counts[counter_key] = seq
            span_id = f"{base}/{stage_name}-{seq}"
        span = TraceSpan(
            trace_id=self.run_id,
            span_id=span_id,
            parent_span_id=parent,
            stage_name=stage_name,
            agent_role=agent_role,
            start=time.monotonic(),
            input_digest=input_digest,
            attributes=dict(attributes or {}),
        )
        token = _current_span.set(span_id)
        try:
            yield span
        except Exception:
            if span.status == "ok":  # code inside may have downgraded already
                span.status = "error"
            raise
        finally:
            _current_span.reset(token)
            span.end = time.monotonic()
            self._record(span)


def load_spans(path: str | Path) -> list[TraceSpan]:
    spans = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            spans.append(TraceSpan.from_dict(json.loads(line)))
    return spans


def validate_span_tree(spans: list[TraceSpan]) -> TraceSpan:
    """Check the spans form a single-rooted tree; returns the root span."""
    by_id = {s.span_id: s for s in spans}
    if len(by_id) != len(spans):
        raise ValueError("duplicate span ids")
    roots = [s for s in spans if s.parent_span_id is None]
    if len(roots) != 1:
        raise ValueError(f"expected exactly one root span, found {len(roots)}")
    for s in spans:
        if s.parent_span_id is not None and s.parent_span_id not in by_id:
            raise ValueError(f"orphan span {s.span_id} (parent {s.parent_span_id} missing)")
        if s.end < s.start:
            raise ValueError(f"span {s.span_id} ends before it starts")
    return roots[0]


def format_span_tree(spans: list[TraceSpan]) -> str:
    """Indented one-line-per-span rendering for the CLI."""
    children: dict[str | None, list[TraceSpan]] = {}
    for s in spans:
        children.setdefault(s.parent_span_id, []).append(s)
    for group in children.values():
        group.sort(key=lambda s: (s.start, s.span_id))
    lines: list[str] = []

    def walk(parent: str | None, depth: int) -> None:
        for s in children.get(parent, []):
            role = f" [{s.agent_role}]" if s.agent_role else ""
            cache = f" cache={s.attributes['cache']}" if "cache" in s.attributes else ""
            lines.append(f"{'  ' * depth}{s.stage_name}{role} status={s.status}{cache} ({s.span_id})")
            walk(s.span_id, depth + 1)

    walk(None, 0)
    return "\n".join(lines)
