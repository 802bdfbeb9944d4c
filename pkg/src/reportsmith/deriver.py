"""SQL derivation: draft, validate, repair, execute, materialize.

The embedded engine registers the refined table as relation ``data``.
Offline mode drafts from per-task templates with canonical formatting
(uppercase keywords, one clause per line) so golden outputs are byte-stable;
the repair path then applies a deterministic fix table instead of a model.
"""

from __future__ import annotations

import re
import sqlite3
from dataclasses import dataclass
from typing import Any, Sequence

from .errors import GatewayError, InsightSkipped, RepairExhausted
from .gateway import LlmGateway
from .ingest import DatasetSchema, TypedTable, infer_kind
from .profiler import FieldProfile, profile_field
from .publisher import ArtifactRef, ObjectStore, materialize

MAX_ATTEMPTS = 3
ROW_CAP = 100_000
_PROBE_ROWS = 16

# Rejected regardless of engine acceptance; validation is the write barrier.
_FORBIDDEN_KEYWORDS = (
    "INSERT", "UPDATE", "DELETE", "CREATE", "DROP", "ATTACH", "COPY",
    "ALTER", "PRAGMA", "VACUUM", "REINDEX",
)
_FORBIDDEN_RE = re.compile(r"\b(" + "|".join(_FORBIDDEN_KEYWORDS) + r")\b", re.IGNORECASE)

_BARE_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_SQL_KEYWORDS = {"select", "from", "where", "group", "order", "by", "limit", "data", "as", "and", "or", "not"}


@dataclass
class CandidateQuery:
    sql: str
    roles: dict[str, str]  # output column -> measure|dimension|time|detail
    attempt: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {"sql": self.sql, "roles": dict(self.roles), "attempt": self.attempt}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CandidateQuery":
        return cls(sql=d["sql"], roles=dict(d["roles"]), attempt=int(d.get("attempt", 0)))


@dataclass
class ValidationResult:
    ok: bool
    result_schema: list[tuple[str, str]] | None = None
    row_count: int | None = None
    error_message: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "result_schema": [[n, k] for n, k in self.result_schema] if self.result_schema else None,
            "row_count": self.row_count,
            "error_message": self.error_message,
        }


@dataclass
class DerivedDataset:
    insight_id: str
    final_query: CandidateQuery
    result_schema: list[tuple[str, str]]
    artifact: ArtifactRef
    mini_profile: list[FieldProfile]
    row_count: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "insight_id": self.insight_id,
            "final_query": self.final_query.to_dict(),
            "result_schema": [[n, k] for n, k in self.result_schema],
            "artifact": self.artifact.to_dict(),
            "mini_profile": [fp.to_dict() for fp in self.mini_profile],
            "row_count": self.row_count,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DerivedDataset":
        return cls(
            insight_id=d["insight_id"],
            final_query=CandidateQuery.from_dict(d["final_query"]),
            result_schema=[(n, k) for n, k in d["result_schema"]],
            artifact=ArtifactRef.from_dict(d["artifact"]),
            mini_profile=[FieldProfile.from_dict(fp) for fp in d["mini_profile"]],
            row_count=int(d["row_count"]),
        )


# --- engine -------------------------------------------------------------------


def ident(name: str) -> str:
    """Render an identifier: bare when safe, double-quoted otherwise."""
    if _BARE_IDENT_RE.match(name) and name.lower() not in _SQL_KEYWORDS:
        return name
    return '"' + name.replace('"', '""') + '"'


def _sqlite_type(kind: str, values: Sequence[Any]) -> str:
    if kind == "quantitative":
        if all(v is None or isinstance(v, int) for v in values):
            return "INTEGER"
        return "REAL"
    if kind == "temporal":
        if all(v is None or isinstance(v, int) for v in values):
            return "INTEGER"
        return "TEXT"
    if kind == "boolean":
        return "INTEGER"
    return "TEXT"


class SqlEngine:
    """In-memory sqlite session with the refined dataset registered as ``data``."""

    def __init__(self, table: TypedTable, schema: DatasetSchema):
        self.schema = schema
        self.conn = sqlite3.connect(":memory:")
        decls = []
        for f in schema.fields:
            decls.append(f"{ident(f.name)} {_sqlite_type(f.kind, table.column(f.name))}")
        self.conn.execute(f"CREATE TABLE data ({', '.join(decls)})")
        placeholders = ", ".join("?" for _ in schema.fields)
        rows = [tuple(int(v) if isinstance(v, bool) else v for v in row) for row in table.rows()]
        self.conn.executemany(f"INSERT INTO data VALUES ({placeholders})", rows)

    def close(self) -> None:
        self.conn.close()

    def execute(self, sql: str) -> tuple[list[str], list[tuple[Any, ...]]]:
        cur = self.conn.execute(sql)
        names = [d[0] for d in cur.description] if cur.description else []
        return names, cur.fetchall()


# --- validation ------------------------------------------------------------------


def _strip_trailing_semicolon(sql: str) -> str:
    return sql.strip().rstrip(";").strip()


def validate_query(sql: str, engine: SqlEngine) -> ValidationResult:
    """Parse and dry-run a candidate without materializing the result set.

    The probe compiles the statement, reads the projected column names, sniffs
    kinds from at most 16 rows, and counts rows via an aggregate; failures come
    back as ok=False values carrying the engine's message verbatim (trailing
    whitespace normalized).
    """
    text = _strip_trailing_semicolon(sql)
    if not text:
        return ValidationResult(ok=False, error_message="empty statement")
    if ";" in text:
        return ValidationResult(ok=False, error_message="multiple statements are not allowed")
    hit = _FORBIDDEN_RE.search(text)
    if hit:
        return ValidationResult(ok=False, error_message=f"read-only violation: {hit.group(1).upper()} is not allowed")
    try:
        engine.conn.execute(f"EXPLAIN {text}").fetchall()
    except sqlite3.Error as exc:
        return ValidationResult(ok=False, error_message=str(exc).rstrip())
    try:
        cur = engine.conn.execute(text)
        names = [d[0] for d in cur.description] if cur.description else []
        probe = cur.fetchmany(_PROBE_ROWS)
    except sqlite3.Error as exc:
        return ValidationResult(ok=False, error_message=str(exc).rstrip())
    if not names:
        return ValidationResult(ok=False, error_message="statement projects no columns")
    try:
        (total,) = engine.conn.execute(f"SELECT COUNT(*) FROM ({text})").fetchone()
    except sqlite3.Error as exc:
        return ValidationResult(ok=False, error_message=str(exc).rstrip())
    if total > ROW_CAP:
        return ValidationResult(
            ok=False,
            row_count=total,
            error_message=f"result has {total} rows; narrow the query (cap {ROW_CAP})",
        )
    schema = []
    for idx, name in enumerate(names):
        column = [row[idx] for row in probe]
        schema.append((name, infer_kind(name, column)))
    return ValidationResult(ok=True, result_schema=schema, row_count=total)


# --- templates ----------------------------------------------------------------


def _pick(plan_fields: Sequence[tuple[str, str]], role: str) -> str | None:
    for name, r in plan_fields:
        if r == role:
            return name
    return None


def _alias(prefix: str, name: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")
    return f"{prefix}_{slug}" if slug else prefix


def template_query(plan, schema: DatasetSchema) -> CandidateQuery:
    """Deterministic per-task SQL with canonical formatting."""
    kinds = {f.name: f.kind for f in schema.fields}
    fields = plan.fields
    time_f = _pick(fields, "time")
    measure = _pick(fields, "measure")
    dimension = _pick(fields, "dimension")
    detail = _pick(fields, "detail")
    task = plan.task

    if task == "trend" and time_f:
        if measure:
            alias = _alias("mean", measure)
            sql = (
                f"SELECT {ident(time_f)},\n"
                f"       AVG({ident(measure)}) AS {alias}\n"
                f"FROM data\n"
                f"GROUP BY {ident(time_f)}\n"
                f"ORDER BY {ident(time_f)}"
            )
            roles = {time_f: "time", alias: "measure"}
        else:
            sql = (
                f"SELECT {ident(time_f)},\n"
                f"       COUNT(*) AS n\n"
                f"FROM data\n"
                f"GROUP BY {ident(time_f)}\n"
                f"ORDER BY {ident(time_f)}"
            )
            roles = {time_f: "time", "n": "measure"}
        return CandidateQuery(sql=sql, roles=roles)

    if task == "correlation" and measure:
        measures = [name for name, r in fields if r == "measure"]
        details = [name for name, r in fields if r == "detail"]
        a = measures[0]
        b = measures[1] if len(measures) > 1 else measures[0]
        cols = [a, b] + details
        select = ",\n       ".join(ident(c) for c in cols)
        order = ", ".join(ident(c) for c in cols)
        sql = (
            f"SELECT {select}\n"
            f"FROM data\n"
            f"WHERE {ident(a)} IS NOT NULL AND {ident(b)} IS NOT NULL\n"
            f"ORDER BY {order}"
        )
        roles = {a: "measure", b: "measure"}
        for d in details:
            roles[d] = "detail"
        return CandidateQuery(sql=sql, roles=roles)

    if task == "comparison" and dimension:
        if measure:
            alias = _alias("mean", measure)
            sql = (
                f"SELECT {ident(dimension)},\n"
                f"       AVG({ident(measure)}) AS {alias}\n"
                f"FROM data\n"
                f"WHERE {ident(measure)} IS NOT NULL\n"
                f"GROUP BY {ident(dimension)}\n"
                f"ORDER BY {ident(dimension)}"
            )
            roles = {dimension: "dimension", alias: "measure"}
        else:
            sql = (
                f"SELECT {ident(dimension)},\n"
                f"       COUNT(*) AS n\n"
                f"FROM data\n"
                f"GROUP BY {ident(dimension)}\n"
                f"ORDER BY {ident(dimension)}"
            )
            roles = {dimension: "dimension", "n": "measure"}
        return CandidateQuery(sql=sql, roles=roles)

    if task == "ranking" and dimension and measure:
        sql = (
            f"SELECT {ident(dimension)},\n"
            f"       {ident(measure)}\n"
            f"FROM data\n"
            f"WHERE {ident(measure)} IS NOT NULL\n"
            f"ORDER BY {ident(measure)} DESC, {ident(dimension)}\n"
            f"LIMIT 20"
        )
        return CandidateQuery(sql=sql, roles={dimension: "dimension", measure: "measure"})

    if task == "part_to_whole" and dimension:
        sql = (
            f"SELECT {ident(dimension)},\n"
            f"       CAST(COUNT(*) AS REAL) / (SELECT COUNT(*) FROM data) AS share\n"
            f"FROM data\n"
            f"GROUP BY {ident(dimension)}\n"
            f"ORDER BY share DESC, {ident(dimension)}"
        )
        return CandidateQuery(sql=sql, roles={dimension: "dimension", "share": "measure"})

    if task == "outlier" and measure:
        extra = detail or dimension
        cols = ([extra] if extra else []) + [measure]
        select = ",\n       ".join(ident(c) for c in cols)
        sql = (
            f"SELECT {select},\n"
            f"       ABS({ident(measure)} - (SELECT AVG({ident(measure)}) FROM data)) AS abs_dev\n"
            f"FROM data\n"
            f"WHERE {ident(measure)} IS NOT NULL\n"
            f"ORDER BY abs_dev DESC, {ident(measure)}" + (f", {ident(extra)}" if extra else "") + "\n"
            f"LIMIT 20"
        )
        roles = {measure: "measure", "abs_dev": "measure"}
        if extra:
            roles[extra] = "detail"
        return CandidateQuery(sql=sql, roles=roles)

    # distribution and any degenerate fall-through
    target = measure or dimension or detail or time_f or fields[0][0]
    if kinds.get(target) == "quantitative":
        sql = (
            f"SELECT {ident(target)}\n"
            f"FROM data\n"
            f"WHERE {ident(target)} IS NOT NULL\n"
            f"ORDER BY {ident(target)}"
        )
        return CandidateQuery(sql=sql, roles={target: "measure"})
    sql = (
        f"SELECT {ident(target)},\n"
        f"       COUNT(*) AS n\n"
        f"FROM data\n"
        f"GROUP BY {ident(target)}\n"
        f"ORDER BY n DESC, {ident(target)}"
    )
    return CandidateQuery(sql=sql, roles={target: "dimension", "n": "measure"})


def draft_query(plan, schema: DatasetSchema, llm: LlmGateway | None) -> CandidateQuery:
    """First candidate: model-drafted when available, template otherwise."""
    if llm is not None:
        try:
            response = llm.complete_role(
                "deriver",
                {
                    "plan": plan.to_dict(),
                    "relation": "data",
                    "fields": [{"name": f.name, "kind": f.kind} for f in schema.fields],
                    "dialect": "ANSI SELECT with GROUP BY, CTEs, window functions",
                },
                schema_id="sql_candidate",
            )
            return CandidateQuery(sql=response.parsed["sql"], roles=dict(response.parsed["roles"]), attempt=0)
        except GatewayError:
            pass
    return template_query(plan, schema)


# --- repair ---------------------------------------------------------------------


def edit_distance(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (ca != cb)))
        previous = current
    return previous[-1]


_UNKNOWN_COLUMN_RE = re.compile(r"no such column:?\s+\"?([\w.]+)\"?")


def _nearest_field(bad: str, schema: DatasetSchema) -> str | None:
    best: tuple[int, str] | None = None
    for f in schema.fields:
        distance = edit_distance(bad.lower(), f.name.lower())
        if distance <= 2 and (best is None or (distance, f.name) < best):
            best = (distance, f.name)
    return best[1] if best else None


def repair_query(
    candidate: CandidateQuery,
    validation: ValidationResult,
    llm: LlmGateway | None,
    schema: DatasetSchema,
    max_attempts: int = MAX_ATTEMPTS,
) -> CandidateQuery:
    """Produce the next candidate; raises RepairExhausted once the budget is spent."""
    if candidate.attempt >= max_attempts:
        raise RepairExhausted(f"attempt budget ({max_attempts}) spent; last error: {validation.error_message}")
    if llm is not None:
        try:
            response = llm.complete_role(
                "repairer",
                {
                    "sql": candidate.sql,
                    "error": validation.error_message,
                    "roles": candidate.roles,
                },
                schema_id="sql_candidate",
            )
            return CandidateQuery(
                sql=response.parsed["sql"],
                roles=dict(response.parsed["roles"]),
                attempt=candidate.attempt + 1,
            )
        except GatewayError:
            pass
    match = _UNKNOWN_COLUMN_RE.search(validation.error_message or "")
    sql, roles = candidate.sql, dict(candidate.roles)
    if match:
        bad = match.group(1).split(".")[-1]
        replacement = _nearest_field(bad, schema)
        if replacement:
            sql = re.sub(rf"\b{re.escape(bad)}\b", replacement, candidate.sql)
            roles = {replacement if k == bad else k: v for k, v in roles.items()}
    return CandidateQuery(sql=sql, roles=roles, attempt=candidate.attempt + 1)


# --- execution + materialization ---------------------------------------------------


def _has_top_level_order_by(sql: str) -> bool:
    depth = 0
    in_string: str | None = None
    upper = sql.upper()
    i = 0
    while i < len(upper):
        ch = upper[i]
        if in_string:
            if ch == in_string:
                in_string = None
        elif ch in ("'", '"'):
            in_string = ch
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif depth == 0 and upper.startswith("ORDER BY", i):
            return True
        i += 1
    return False


def _canonical_sort(rows: list[tuple[Any, ...]]) -> list[tuple[Any, ...]]:
    def cell_key(v: Any):
        if v is None:
            return (0, "", 0.0)
        if isinstance(v, bool):
            return (2, str(v), 0.0)
        if isinstance(v, (int, float)):
            return (1, "", float(v))
        return (2, str(v), 0.0)

    return sorted(rows, key=lambda row: tuple(cell_key(v) for v in row))


def result_kinds(
    names: Sequence[str],
    rows: Sequence[tuple[Any, ...]],
    roles: dict[str, str],
    schema: DatasetSchema,
) -> list[tuple[str, str]]:
    """Kinds for derived columns: source kind wins by name, then role, then values."""
    source = {f.name: f.kind for f in schema.fields}
    out = []
    for idx, name in enumerate(names):
        if name in source:
            out.append((name, source[name]))
            continue
        role = roles.get(name)
        values = [row[idx] for row in rows]
        if role == "time":
            out.append((name, "temporal"))
        elif role == "measure":
            out.append((name, "quantitative"))
        else:
            out.append((name, infer_kind(name, values)))
    return out


def execute_final(
    insight_id: str,
    candidate: CandidateQuery,
    engine: SqlEngine,
    schema: DatasetSchema,
    store: ObjectStore,
) -> DerivedDataset:
    """Run the validated query, publish the result, profile the output columns."""
    names, rows = engine.execute(_strip_trailing_semicolon(candidate.sql))
    if not _has_top_level_order_by(candidate.sql):
        rows = _canonical_sort(rows)
    kinds = result_kinds(names, rows, candidate.roles, schema)
    artifact = materialize(rows, kinds, store, logical_name=f"{insight_id}.parquet")
    mini_profile = []
    for idx, (name, kind) in enumerate(kinds):
        mini_profile.append(profile_field(name, [row[idx] for row in rows], kind))
    return DerivedDataset(
        insight_id=insight_id,
        final_query=candidate,
        result_schema=kinds,
        artifact=artifact,
        mini_profile=mini_profile,
        row_count=len(rows),
    )


def derive(
    plan,
    schema: DatasetSchema,
    engine: SqlEngine,
    llm: LlmGateway | None,
    store: ObjectStore,
    max_attempts: int = MAX_ATTEMPTS,
    tracer=None,
) -> DerivedDataset:
    """Full draft → validate → (repair → validate)* → execute → materialize loop."""
    candidate, validation, attempts = finalize_query(plan, schema, engine, llm, max_attempts, tracer)
    if not validation.ok:
        raise InsightSkipped(plan.insight_id, validation.error_message or "validation failed", attempts)
    return execute_final(plan.insight_id, candidate, engine, schema, store)


def finalize_query(
    plan,
    schema: DatasetSchema,
    engine: SqlEngine,
    llm: LlmGateway | None,
    max_attempts: int = MAX_ATTEMPTS,
    tracer=None,
) -> tuple[CandidateQuery, ValidationResult, list[str]]:
    """Draft/validate/repair without executing; returns the last candidate,
    its validation, and every attempted SQL text."""
    candidate = draft_query(plan, schema, llm)
    attempts = [candidate.sql]
    validation = _validate_with_roles(candidate, engine)
    while not validation.ok:
        if candidate.attempt >= max_attempts:
            break  # budget spent; caller decides whether to skip the insight
        if tracer is not None:
            with tracer.span("repair", attributes={"error": validation.error_message or ""}) as span:
                candidate = repair_query(candidate, validation, llm, schema, max_attempts)
                attempts.append(candidate.sql)
                validation = _validate_with_roles(candidate, engine)
                if not validation.ok:  # a repair that did not fix is an error span
                    span.status = "error"
                    span.attributes["unresolved_error"] = validation.error_message or ""
        else:
            candidate = repair_query(candidate, validation, llm, schema, max_attempts)
            attempts.append(candidate.sql)
            validation = _validate_with_roles(candidate, engine)
    return candidate, validation, attempts


def _validate_with_roles(candidate: CandidateQuery, engine: SqlEngine) -> ValidationResult:
    """validate_query plus the role-totality contract on the projection."""
    validation = validate_query(candidate.sql, engine)
    if not validation.ok:
        return validation
    names = [n for n, _ in validation.result_schema or []]
    missing = [n for n in names if n not in candidate.roles]
    extra = [r for r in candidate.roles if r not in names]
    if missing or extra:
        problems = []
        if missing:
            problems.append(f"columns without a role: {', '.join(missing)}")
        if extra:
            problems.append(f"roles for absent columns: {', '.join(extra)}")
        return ValidationResult(ok=False, error_message="; ".join(problems))
    return validation
