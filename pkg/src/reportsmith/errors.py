"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class ReportsmithError(Exception):
    """Base class for all pipeline errors."""


# --- ingest ---------------------------------------------------------------

class UnreadableSource(ReportsmithError):
    pass


class UnsupportedFormat(ReportsmithError):
    pass


class EmptyDataset(ReportsmithError):
    pass


class KnowledgeSourceUnavailable(ReportsmithError):
    """Non-fatal: the code-expansion backend could not be reached."""


# --- profiler -------------------------------------------------------------

class UnknownField(ReportsmithError):
    pass


class UnknownQueryKind(ReportsmithError):
    pass


# --- planner --------------------------------------------------------------

class PlanInvalid(ReportsmithError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class InsufficientFields(ReportsmithError):
    pass


# --- deriver --------------------------------------------------------------

class RepairExhausted(ReportsmithError):
    pass


class InsightSkipped(ReportsmithError):
    """A single insight was abandoned; carries the last engine error."""

    def __init__(self, insight_id: str, reason: str, attempted_sql: list[str] | None = None):
        super().__init__(f"{insight_id}: {reason}")
        self.insight_id = insight_id
        self.reason = reason
        self.attempted_sql = attempted_sql or []


# --- publisher ------------------------------------------------------------

class StoreUnavailable(ReportsmithError):
    pass


# --- vizrec ---------------------------------------------------------------

class NoBindableFields(ReportsmithError):
    pass


class NoValidCandidate(ReportsmithError):
    pass


# --- reporter -------------------------------------------------------------

class EmptyReport(ReportsmithError):
    pass


# --- llm gateway ----------------------------------------------------------

class GatewayError(ReportsmithError):
    """Any failure to obtain a usable model response."""


class NoFixture(GatewayError):
    """Stub backend has no fixture for this (role, prompt) pair."""


class HttpError(GatewayError):
    pass


class SchemaViolation(GatewayError):
    pass


class UnknownRole(ReportsmithError):
    pass


# --- orchestrator ---------------------------------------------------------

class UnknownNode(ReportsmithError):
    pass
