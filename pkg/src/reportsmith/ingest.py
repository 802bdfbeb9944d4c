"""Dataset loading, field refinement, code expansion, and description.

Loading keeps cells raw; all typing happens in refine_fields through a fixed,
documented heuristic ladder so the same input always yields the same schema.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, replace
from datetime import date, datetime
from pathlib import Path
from typing import Any, Sequence

import polars as pl

from .errors import EmptyDataset, GatewayError, KnowledgeSourceUnavailable, UnreadableSource, UnsupportedFormat
from .publisher import content_key

# Fixed sentinel list; override through PipelineConfig.null_sentinels.
DEFAULT_NULL_SENTINELS = ("", "NA", "N/A", "null")

# Sample size for describe/expand prompts: first N distinct values in
# first-occurrence order.
SAMPLE_LIMIT = 20

KIND_TAXONOMY = ("quantitative", "temporal", "ordinal", "nominal", "boolean", "identifier")

_YEAR_NAME_RE = re.compile(r"year|date", re.IGNORECASE)
_YEAR_RANGE = (1678, 2262)
_BOOL_TOKENS = {
    "true": True, "false": False,
    "yes": True, "no": False,
    "1": True, "0": False,
}
_CRYPTIC_RE = re.compile(r"^[A-Z0-9]{1,3}$")


@dataclass(frozen=True)
class RawTable:
    columns: list[tuple[str, list[Any]]]
    row_count: int
    source_uri: str

    def column_names(self) -> list[str]:
        return [name for name, _ in self.columns]


@dataclass
class FieldSchema:
    name: str
    kind: str
    unit_hint: str | None = None
    description: str = ""
    code_dictionary: dict[str, str] | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "unit_hint": self.unit_hint,
            "description": self.description,
            "code_dictionary": self.code_dictionary,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FieldSchema":
        return cls(
            name=d["name"],
            kind=d["kind"],
            unit_hint=d.get("unit_hint"),
            description=d.get("description", ""),
            code_dictionary=d.get("code_dictionary"),
        )


@dataclass
class DatasetSchema:
    dataset_digest: str
    fields: list[FieldSchema]
    description: str
    row_count: int

    def field_map(self) -> dict[str, FieldSchema]:
        return {f.name: f for f in self.fields}

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset_digest": self.dataset_digest,
            "fields": [f.to_dict() for f in self.fields],
            "description": self.description,
            "row_count": self.row_count,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "DatasetSchema":
        return cls(
            dataset_digest=d["dataset_digest"],
            fields=[FieldSchema.from_dict(f) for f in d["fields"]],
            description=d["description"],
            row_count=int(d["row_count"]),
        )


@dataclass(frozen=True)
class TypedTable:
    """Refined table: sentinel nulls mapped, cells coerced to their kind."""

    columns: list[tuple[str, list[Any]]]
    row_count: int

    def column(self, name: str) -> list[Any]:
        for col_name, values in self.columns:
            if col_name == name:
                return values
        raise KeyError(name)

    def column_names(self) -> list[str]:
        return [name for name, _ in self.columns]

    def rows(self) -> list[tuple[Any, ...]]:
        if not self.columns:
            return []
        series = [values for _, values in self.columns]
        return list(zip(*series)) if self.row_count else []


# --- loading ----------------------------------------------------------------


def _normalize_headers(raw_names: Sequence[Any]) -> list[str]:
    names: list[str] = []
    used: set[str] = set()
    for idx, raw in enumerate(raw_names):
        name = ("" if raw is None else str(raw)).lstrip("﻿").strip()
        if not name:
            name = f"column_{idx + 1}"
        candidate = name
        bump = 1
        while candidate in used:
            bump += 1
            candidate = f"{name}_{bump}"
        used.add(candidate)
        names.append(candidate)
    return names


def _load_csv(path: Path, uri: str) -> RawTable:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise UnreadableSource(f"cannot read {uri}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyDataset(f"{uri} has no header row")
    names = _normalize_headers(header)
    if not names:
        raise EmptyDataset(f"{uri} has zero columns")
    columns: list[list[Any]] = [[] for _ in names]
    row_count = 0
    for row in reader:
        if not row:
            continue
        while len(row) > len(names):
            names.append(f"column_{len(names) + 1}")
            columns.append([None] * row_count)
        for idx in range(len(names)):
            columns[idx].append(row[idx] if idx < len(row) else None)
        row_count += 1
    return RawTable(
        columns=[(name, values) for name, values in zip(names, columns)],
        row_count=row_count,
        source_uri=uri,
    )


def _load_parquet(path: Path, uri: str) -> RawTable:
    try:
        frame = pl.read_parquet(path)
    except OSError as exc:
        raise UnreadableSource(f"cannot read {uri}: {exc}") from exc
    except Exception as exc:  # polars raises ComputeError subclasses on bad files
        raise UnreadableSource(f"cannot parse parquet {uri}: {exc}") from exc
    if frame.width == 0:
        raise EmptyDataset(f"{uri} has zero columns")
    columns = []
    for name in frame.columns:
        values = frame.get_column(name).to_list()
        columns.append((name, values))
    return RawTable(columns=columns, row_count=frame.height, source_uri=uri)


def load_dataset(uri: str, format_hint: str | None = None) -> RawTable:
    """Load a CSV or parquet file into raw (untyped) columns."""
    path = Path(uri)
    if not path.exists():
        raise UnreadableSource(f"no such file: {uri}")
    if path.stat().st_size == 0:
        raise EmptyDataset(f"{uri} is empty")
    fmt = format_hint
    if fmt is None:
        suffix = path.suffix.lower()
        if suffix == ".csv":
            fmt = "csv"
        elif suffix in (".parquet", ".pq"):
            fmt = "parquet"
        else:
            raise UnsupportedFormat(f"cannot detect format of {uri} (extension {suffix or 'none'})")
    if fmt == "csv":
        return _load_csv(path, uri)
    if fmt == "parquet":
        return _load_parquet(path, uri)
    raise UnsupportedFormat(f"unsupported format hint: {fmt}")


# --- refinement ---------------------------------------------------------------


def _clean_cell(value: Any, sentinels: Sequence[str]) -> Any:
    """Trim text and map sentinel tokens to None; other cells pass through."""
    if value is None:
        return None
    if isinstance(value, str):
        trimmed = value.strip()
        lowered = trimmed.lower()
        for sentinel in sentinels:
            if lowered == sentinel.lower():
                return None
        return trimmed
    if isinstance(value, float) and value != value:  # NaN from parquet
        return None
    return value


def _parse_number(value: Any) -> int | float | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        text = value.strip()
        if not text:
            return None
        try:
            return int(text)
        except ValueError:
            pass
        try:
            return float(text)
        except ValueError:
            return None
    return None


def _parse_iso_date(value: Any) -> str | None:
    if isinstance(value, (date, datetime)):
        return value.isoformat()
    if not isinstance(value, str):
        return None
    text = value.strip()
    try:
        return date.fromisoformat(text).isoformat()
    except ValueError:
        pass
    try:
        return datetime.fromisoformat(text).isoformat()
    except ValueError:
        return None


def _as_bool_token(value: Any) -> bool | None:
    if isinstance(value, bool):
        return value
    token = str(value).strip().lower()
    return _BOOL_TOKENS.get(token)


def infer_kind(name: str, cleaned: Sequence[Any]) -> str:
    """Assign exactly one kind using the precedence ladder.

    boolean > temporal > quantitative > identifier > ordinal > nominal.
    Constant or all-null columns fall through to nominal.
    """
    non_null = [v for v in cleaned if v is not None]
    if not non_null:
        return "nominal"
    distinct = []
    seen = set()
    for v in non_null:
        key = str(v)
        if key not in seen:
            seen.add(key)
            distinct.append(v)

    if all(_as_bool_token(v) is not None for v in distinct):
        return "boolean"

    iso_hits = sum(1 for v in non_null if _parse_iso_date(v) is not None)
    if iso_hits / len(non_null) >= 0.95:
        return "temporal"
    numbers = [_parse_number(v) for v in non_null]
    if all(
        n is not None and float(n).is_integer() and _YEAR_RANGE[0] <= n <= _YEAR_RANGE[1]
        for n in numbers
    ) and _YEAR_NAME_RE.search(name):
        return "temporal"

    numeric_hits = sum(1 for n in numbers if n is not None)
    if numeric_hits / len(non_null) >= 0.95:
        return "quantitative"

    # distinct_ratio alone would call tiny all-distinct samples identifiers;
    # low-cardinality text must stay nominal, so require real cardinality too.
    textual = all(isinstance(v, str) for v in distinct)
    if textual and len(seen) >= 20 and len(seen) / len(non_null) >= 0.95:
        return "identifier"

    return "nominal"


def refine_fields(table: RawTable, sentinels: Sequence[str] = DEFAULT_NULL_SENTINELS) -> list[FieldSchema]:
    """Classify every column; total and deterministic, never raises."""
    fields = []
    for name, values in table.columns:
        cleaned = [_clean_cell(v, sentinels) for v in values]
        kind = infer_kind(name, cleaned)
        fields.append(FieldSchema(name=name, kind=kind, description=""))
    return fields


def _coerce(value: Any, kind: str) -> Any:
    if value is None:
        return None
    if kind == "boolean":
        token = _as_bool_token(value)
        return token if token is not None else None
    if kind == "temporal":
        number = _parse_number(value)
        if number is not None and float(number).is_integer():
            return int(number)
        iso = _parse_iso_date(value)
        return iso if iso is not None else str(value)
    if kind == "quantitative":
        return _parse_number(value)
    return str(value)


def apply_schema(
    table: RawTable,
    fields: Sequence[FieldSchema],
    sentinels: Sequence[str] = DEFAULT_NULL_SENTINELS,
) -> TypedTable:
    """Produce the cleaned, typed table the rest of the pipeline runs on."""
    by_name = dict(table.columns)
    columns = []
    for spec in fields:
        cleaned = [_clean_cell(v, sentinels) for v in by_name[spec.name]]
        columns.append((spec.name, [_coerce(v, spec.kind) for v in cleaned]))
    return TypedTable(columns=columns, row_count=table.row_count)


def distinct_sample(values: Sequence[Any], limit: int = SAMPLE_LIMIT) -> list[Any]:
    """First `limit` distinct non-null values in first-occurrence order."""
    out: list[Any] = []
    seen: set[str] = set()
    for v in values:
        if v is None:
            continue
        key = str(v)
        if key not in seen:
            seen.add(key)
            out.append(v)
            if len(out) >= limit:
                break
    return out


# --- code expansion ---------------------------------------------------------


class KnowledgeSource:
    """Resolves cryptic code values to human labels for one field."""

    def lookup(self, field_name: str, values: Sequence[str]) -> dict[str, str]:
        raise NotImplementedError


class DirectoryKnowledgeSource(KnowledgeSource):
    """Fixture backend: flat ``knowledge/<field-name>.json`` code→label maps."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def lookup(self, field_name: str, values: Sequence[str]) -> dict[str, str]:
        if not self.root.is_dir():
            raise KnowledgeSourceUnavailable(f"knowledge directory missing: {self.root}")
        mapping_path = self.root / f"{field_name}.json"
        if not mapping_path.exists():
            return {}
        try:
            mapping = json.loads(mapping_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise KnowledgeSourceUnavailable(f"bad knowledge file {mapping_path}: {exc}") from exc
        return {v: mapping[v] for v in values if v in mapping}


def is_cryptic_token(value: str) -> bool:
    return bool(_CRYPTIC_RE.match(value))


def expand_codes(field_schema: FieldSchema, samples: Sequence[Any], knowledge: KnowledgeSource) -> FieldSchema:
    """Fill code_dictionary for values the knowledge source can resolve.

    Raises KnowledgeSourceUnavailable when the backend is down; callers treat
    that as a warning and keep the field unchanged.
    """
    texts = [str(v) for v in samples if v is not None]
    if not texts:
        return field_schema
    cryptic = [t for t in texts if is_cryptic_token(t)]
    if not cryptic:
        return field_schema
    targets = texts if len(cryptic) / len(texts) >= 0.5 else cryptic
    resolved = knowledge.lookup(field_schema.name, targets)
    if not resolved:
        return field_schema
    merged = dict(field_schema.code_dictionary or {})
    merged.update(resolved)
    return replace(field_schema, code_dictionary=merged)


# --- description --------------------------------------------------------------


def template_description(fields: Sequence[FieldSchema], row_count: int) -> str:
    names = ", ".join(f"{f.name} ({f.kind})" for f in fields)
    return f"Dataset with {row_count} rows and fields: {names}."


def describe_dataset(schema: Sequence[FieldSchema], sample_rows: Sequence[Any], llm, row_count: int) -> DatasetSchema:
    """Attach a dataset description; falls back to the deterministic template."""
    if not schema:
        raise EmptyDataset("cannot describe a dataset with no fields")
    description = None
    if llm is not None:
        try:
            response = llm.complete_role(
                "describer",
                {
                    "fields": [f.to_dict() for f in schema],
                    "row_count": row_count,
                    "sample_rows": list(sample_rows),
                },
                schema_id="dataset_description",
            )
            description = str(response.parsed).strip() or None
        except GatewayError:
            description = None
    if not description:
        description = template_description(schema, row_count)
    digest = content_key(
        json.dumps(
            {
                "fields": [f.to_dict() for f in schema],
                "row_count": row_count,
                "description": description,
            },
            sort_keys=True,
            ensure_ascii=True,
        ).encode("utf-8")
    )
    return DatasetSchema(
        dataset_digest=digest,
        fields=list(schema),
        description=description,
        row_count=row_count,
    )
