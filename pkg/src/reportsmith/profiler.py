"""Deterministic statistical profiling and hint generation.

The profile is the pipeline's externalized statistical truth: planning and
chart recommendation read these numbers instead of re-touching raw data.
Hint rules live in an editable rules file so analyst interventions are a
config change, not a code change.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import UnknownField, UnknownQueryKind
from .ingest import DatasetSchema, TypedTable
from .publisher import content_key

DISCRETE_KINDS = ("nominal", "ordinal", "boolean")
TOP_K = 10
PAIR_MAX_DISTINCT = 50
PAIR_MIN_COMPLETE_ROWS = 3

HINT_KINDS = (
    "facet_candidate",
    "measure_candidate",
    "correlation",
    "trend_axis",
    "skew_alert",
    "null_alert",
)


@dataclass
class FieldProfile:
    name: str
    kind: str
    count: int
    null_count: int
    distinct_count: int
    min: Any = None
    max: Any = None
    mean: float | None = None
    stddev: float | None = None
    quantiles: dict[str, float] | None = None
    skewness: float | None = None
    entropy_bits: float = 0.0
    normalized_entropy: float = 0.0
    top_k: list[tuple[Any, int]] = field(default_factory=list)
    orders_of_magnitude: float | None = None
    has_nonpositive: bool | None = None

    @property
    def null_ratio(self) -> float:
        return self.null_count / self.count if self.count else 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "count": self.count,
            "null_count": self.null_count,
            "distinct_count": self.distinct_count,
            "min": self.min,
            "max": self.max,
            "mean": self.mean,
            "stddev": self.stddev,
            "quantiles": self.quantiles,
            "skewness": self.skewness,
            "entropy_bits": self.entropy_bits,
            "normalized_entropy": self.normalized_entropy,
            "top_k": [[v, c] for v, c in self.top_k],
            "orders_of_magnitude": self.orders_of_magnitude,
            "has_nonpositive": self.has_nonpositive,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "FieldProfile":
        return cls(
            name=d["name"],
            kind=d["kind"],
            count=d["count"],
            null_count=d["null_count"],
            distinct_count=d["distinct_count"],
            min=d.get("min"),
            max=d.get("max"),
            mean=d.get("mean"),
            stddev=d.get("stddev"),
            quantiles=d.get("quantiles"),
            skewness=d.get("skewness"),
            entropy_bits=d.get("entropy_bits", 0.0),
            normalized_entropy=d.get("normalized_entropy", 0.0),
            top_k=[(v, c) for v, c in d.get("top_k", [])],
            orders_of_magnitude=d.get("orders_of_magnitude"),
            has_nonpositive=d.get("has_nonpositive"),
        )


@dataclass(frozen=True)
class PairStat:
    field_a: str
    field_b: str
    kind: str  # pearson_r | cramers_v | variance_ratio
    value: float

    def to_dict(self) -> dict[str, Any]:
        return {"field_a": self.field_a, "field_b": self.field_b, "kind": self.kind, "value": self.value}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PairStat":
        return cls(d["field_a"], d["field_b"], d["kind"], d["value"])


@dataclass(frozen=True)
class Hint:
    hint_kind: str
    fields: tuple[str, ...]
    evidence: dict[str, float]
    rule_id: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "hint_kind": self.hint_kind,
            "fields": list(self.fields),
            "evidence": dict(self.evidence),
            "rule_id": self.rule_id,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Hint":
        return cls(d["hint_kind"], tuple(d["fields"]), dict(d["evidence"]), d["rule_id"])


@dataclass
class StatisticalProfile:
    per_field: list[FieldProfile]
    pairs: list[PairStat]
    hints: list[Hint]
    profile_digest: str = ""

    def field_profile(self, name: str) -> FieldProfile:
        for fp in self.per_field:
            if fp.name == name:
                return fp
        raise UnknownField(name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_field": [fp.to_dict() for fp in self.per_field],
            "pairs": [p.to_dict() for p in self.pairs],
            "hints": [h.to_dict() for h in self.hints],
            "profile_digest": self.profile_digest,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "StatisticalProfile":
        return cls(
            per_field=[FieldProfile.from_dict(fp) for fp in d["per_field"]],
            pairs=[PairStat.from_dict(p) for p in d["pairs"]],
            hints=[Hint.from_dict(h) for h in d["hints"]],
            profile_digest=d.get("profile_digest", ""),
        )


# --- per-field statistics ----------------------------------------------------


def _sort_key(value: Any):
    if isinstance(value, bool):
        return (1, str(value))
    if isinstance(value, (int, float)):
        return (0, float(value), "")
    return (1, str(value))


def _top_k(values: Sequence[Any], k: int = TOP_K) -> list[tuple[Any, int]]:
    counts: dict[Any, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    ordered = sorted(counts.items(), key=lambda item: (-item[1], _sort_key(item[0])))
    return ordered[:k]


def _entropy_bits(values: Sequence[Any]) -> float:
    counts: dict[Any, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    n = len(values)
    if n == 0:
        return 0.0
    h = 0.0
    for c in counts.values():
        p = c / n
        h -= p * math.log2(p)
    return h


def profile_field(name: str, values: Sequence[Any], kind: str) -> FieldProfile:
    """Compute all applicable statistics for one typed column."""
    count = len(values)
    non_null = [v for v in values if v is not None]
    null_count = count - len(non_null)
    distinct_count = len({str(v) for v in non_null})

    entropy = _entropy_bits(non_null)
    if distinct_count <= 1:
        normalized = 0.0
    else:
        normalized = entropy / math.log2(distinct_count)

    fp = FieldProfile(
        name=name,
        kind=kind,
        count=count,
        null_count=null_count,
        distinct_count=distinct_count,
        entropy_bits=entropy,
        normalized_entropy=normalized,
        top_k=_top_k(non_null),
    )

    if kind == "temporal" and non_null:
        fp.min = min(non_null, key=_sort_key)
        fp.max = max(non_null, key=_sort_key)

    if kind == "quantitative" and non_null:
        arr = np.asarray([float(v) for v in non_null], dtype=np.float64)
        fp.min = float(arr.min())
        fp.max = float(arr.max())
        fp.mean = float(arr.mean())
        fp.stddev = float(arr.std(ddof=0))
        fp.quantiles = {
            "p25": float(np.quantile(arr, 0.25)),
            "p50": float(np.quantile(arr, 0.50)),
            "p75": float(np.quantile(arr, 0.75)),
        }
        # Population Fisher-Pearson g1; undefined for constant or tiny columns
        # (the m2**1.5 guard also catches denormal variances that underflow).
        if len(arr) >= 3 and fp.stddev > 0:
            m2 = float(np.mean((arr - arr.mean()) ** 2))
            m3 = float(np.mean((arr - arr.mean()) ** 3))
            denom = m2 ** 1.5
            if denom > 0:
                fp.skewness = m3 / denom
        fp.has_nonpositive = bool((arr <= 0).any())
        positives = arr[arr > 0]
        if positives.size:
            fp.orders_of_magnitude = float(math.log10(positives.max()) - math.log10(positives.min()))
    return fp


# --- pairwise statistics -------------------------------------------------------


def _complete_pairs(xs: Sequence[Any], ys: Sequence[Any]) -> tuple[list[Any], list[Any]]:
    ax, ay = [], []
    for x, y in zip(xs, ys):
        if x is not None and y is not None:
            ax.append(x)
            ay.append(y)
    return ax, ay


def _pearson(xs: list[float], ys: list[float]) -> float | None:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    sx = x.std(ddof=0)
    sy = y.std(ddof=0)
    if sx == 0 or sy == 0:
        return None
    cov = float(np.mean((x - x.mean()) * (y - y.mean())))
    return cov / (sx * sy)


def _cramers_v(xs: list[Any], ys: list[Any]) -> float | None:
    levels_x = sorted({str(v) for v in xs})
    levels_y = sorted({str(v) for v in ys})
    r, c = len(levels_x), len(levels_y)
    if min(r, c) < 2:
        return None
    ix = {v: i for i, v in enumerate(levels_x)}
    iy = {v: i for i, v in enumerate(levels_y)}
    table = np.zeros((r, c), dtype=np.float64)
    for x, y in zip(xs, ys):
        table[ix[str(x)], iy[str(y)]] += 1.0
    n = table.sum()
    row = table.sum(axis=1, keepdims=True)
    col = table.sum(axis=0, keepdims=True)
    expected = row @ col / n
    mask = expected > 0
    chi2 = float((((table - expected) ** 2)[mask] / expected[mask]).sum())
    return math.sqrt(chi2 / (n * (min(r, c) - 1)))


def _variance_ratio(groups: list[Any], ys: list[float]) -> float | None:
    y = np.asarray(ys, dtype=np.float64)
    total_var = float(y.var(ddof=0))
    if total_var == 0:
        return None
    grand = float(y.mean())
    between = 0.0
    by_group: dict[str, list[float]] = {}
    for g, v in zip(groups, ys):
        by_group.setdefault(str(g), []).append(v)
    for members in by_group.values():
        m = np.asarray(members, dtype=np.float64)
        between += m.size * (float(m.mean()) - grand) ** 2
    between /= y.size
    return between / total_var


def profile_pairs(table: TypedTable, schema: DatasetSchema, per_field: Sequence[FieldProfile]) -> list[PairStat]:
    """Pairwise statistics over complete rows, in schema field order.

    Q×Q → pearson_r; discrete×discrete (both ≤50 distinct) → cramers_v;
    discrete(≤50)×Q → variance_ratio with field_a always the grouping field.
    Temporal and identifier fields take part in no pair; degenerate pairs
    (constant variable, <3 complete rows) are omitted.
    """
    profiles = {fp.name: fp for fp in per_field}
    fields = schema.fields
    stats: list[PairStat] = []
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            fa, fb = fields[i], fields[j]
            ka, kb = fa.kind, fb.kind
            xs, ys = _complete_pairs(table.column(fa.name), table.column(fb.name))
            if len(xs) < PAIR_MIN_COMPLETE_ROWS:
                continue
            da = profiles[fa.name].distinct_count <= PAIR_MAX_DISTINCT
            db = profiles[fb.name].distinct_count <= PAIR_MAX_DISTINCT
            value: float | None = None
            kind: str | None = None
            a_name, b_name = fa.name, fb.name
            if ka == "quantitative" and kb == "quantitative":
                kind = "pearson_r"
                value = _pearson([float(v) for v in xs], [float(v) for v in ys])
            elif ka in DISCRETE_KINDS and kb in DISCRETE_KINDS and da and db:
                kind = "cramers_v"
                value = _cramers_v(xs, ys)
            elif ka in DISCRETE_KINDS and kb == "quantitative" and da:
                kind = "variance_ratio"
                value = _variance_ratio(xs, [float(v) for v in ys])
            elif ka == "quantitative" and kb in DISCRETE_KINDS and db:
                kind = "variance_ratio"
                a_name, b_name = fb.name, fa.name
                value = _variance_ratio(ys, [float(v) for v in xs])
            if kind is not None and value is not None:
                stats.append(PairStat(field_a=a_name, field_b=b_name, kind=kind, value=float(value)))
    return stats


# --- hint rules -----------------------------------------------------------------


@dataclass(frozen=True)
class HintRule:
    rule_id: str
    kind: str
    params: dict[str, float]


@dataclass
class HintRuleSet:
    rules: list[HintRule]

    @classmethod
    def from_dict(cls, entries: Sequence[dict[str, Any]]) -> "HintRuleSet":
        rules = []
        for e in entries:
            if e["kind"] not in HINT_KINDS:
                raise UnknownQueryKind(f"unknown hint kind in rules file: {e['kind']}")
            rules.append(HintRule(rule_id=e["rule_id"], kind=e["kind"], params=dict(e.get("params", {}))))
        return cls(rules)

    @classmethod
    def load(cls, path: str | Path) -> "HintRuleSet":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    @classmethod
    def default(cls) -> "HintRuleSet":
        return cls.load(Path(__file__).parent / "assets" / "rules.json")


def _facet_hints(rule: HintRule, per_field: Sequence[FieldProfile]) -> list[Hint]:
    lo = rule.params.get("min_distinct", 2)
    hi = rule.params.get("max_distinct", 12)
    h_min = rule.params.get("min_normalized_entropy", 0.5)
    out = []
    for fp in per_field:
        if fp.kind in DISCRETE_KINDS and lo <= fp.distinct_count <= hi and fp.normalized_entropy >= h_min:
            out.append(
                Hint(
                    hint_kind="facet_candidate",
                    fields=(fp.name,),
                    evidence={"distinct_count": fp.distinct_count, "normalized_entropy": fp.normalized_entropy},
                    rule_id=rule.rule_id,
                )
            )
    return out


def _measure_hints(rule: HintRule, per_field: Sequence[FieldProfile]) -> list[Hint]:
    min_distinct = rule.params.get("min_distinct", 10)
    return [
        Hint(
            hint_kind="measure_candidate",
            fields=(fp.name,),
            evidence={"distinct_count": fp.distinct_count},
            rule_id=rule.rule_id,
        )
        for fp in per_field
        if fp.kind == "quantitative" and fp.distinct_count >= min_distinct
    ]


def _correlation_hints(rule: HintRule, pairs: Sequence[PairStat]) -> list[Hint]:
    min_abs = rule.params.get("min_abs_r", 0.3)
    return [
        Hint(
            hint_kind="correlation",
            fields=(p.field_a, p.field_b),
            evidence={"pearson_r": p.value},
            rule_id=rule.rule_id,
        )
        for p in pairs
        if p.kind == "pearson_r" and abs(p.value) >= min_abs
    ]


def _trend_hints(rule: HintRule, per_field: Sequence[FieldProfile]) -> list[Hint]:
    return [
        Hint(
            hint_kind="trend_axis",
            fields=(fp.name,),
            evidence={"distinct_count": fp.distinct_count},
            rule_id=rule.rule_id,
        )
        for fp in per_field
        if fp.kind == "temporal"
    ]


def _skew_hints(rule: HintRule, per_field: Sequence[FieldProfile]) -> list[Hint]:
    min_skew = rule.params.get("min_abs_skewness", 2)
    min_om = rule.params.get("min_orders_of_magnitude", 3)
    out = []
    for fp in per_field:
        if fp.kind != "quantitative":
            continue
        evidence: dict[str, float] = {}
        if fp.skewness is not None and abs(fp.skewness) >= min_skew:
            evidence["skewness"] = fp.skewness
        if fp.orders_of_magnitude is not None and fp.orders_of_magnitude >= min_om:
            evidence["orders_of_magnitude"] = fp.orders_of_magnitude
        if evidence:
            out.append(Hint(hint_kind="skew_alert", fields=(fp.name,), evidence=evidence, rule_id=rule.rule_id))
    return out


def _null_hints(rule: HintRule, per_field: Sequence[FieldProfile]) -> list[Hint]:
    min_ratio = rule.params.get("min_null_ratio", 0.2)
    return [
        Hint(
            hint_kind="null_alert",
            fields=(fp.name,),
            evidence={"null_ratio": fp.null_ratio},
            rule_id=rule.rule_id,
        )
        for fp in per_field
        if fp.count and fp.null_ratio >= min_ratio
    ]


_HINT_GENERATORS = {
    "facet_candidate": _facet_hints,
    "measure_candidate": _measure_hints,
    "trend_axis": _trend_hints,
    "skew_alert": _skew_hints,
    "null_alert": _null_hints,
}


def generate_hints(per_field: Sequence[FieldProfile], pairs: Sequence[PairStat], rules: HintRuleSet) -> list[Hint]:
    """Run the active rule set; order is rule order, then field order."""
    hints: list[Hint] = []
    for rule in rules.rules:
        if rule.kind == "correlation":
            hints.extend(_correlation_hints(rule, pairs))
        else:
            hints.extend(_HINT_GENERATORS[rule.kind](rule, per_field))
    return hints


def profile_table(table: TypedTable, schema: DatasetSchema, rules: HintRuleSet) -> StatisticalProfile:
    """Assemble the full profile: per-field stats, pair stats, hints, digest."""
    per_field = [profile_field(f.name, table.column(f.name), f.kind) for f in schema.fields]
    pairs = profile_pairs(table, schema, per_field)
    hints = generate_hints(per_field, pairs, rules)
    profile = StatisticalProfile(per_field=per_field, pairs=pairs, hints=hints)
    payload = json.dumps(
        {
            "per_field": [fp.to_dict() for fp in per_field],
            "pairs": [p.to_dict() for p in pairs],
            "hints": [h.to_dict() for h in hints],
        },
        sort_keys=True,
        ensure_ascii=True,
    )
    profile.profile_digest = content_key(payload.encode("utf-8"))
    return profile


# --- profile queries ---------------------------------------------------------------

QUERY_KINDS = ("field_summary", "facet_candidates", "top_correlations", "temporal_fields", "distinct_values")


@dataclass(frozen=True)
class ProfileQuery:
    kind: str
    field: str | None = None
    n: int | None = None
    limit: int | None = None


@dataclass(frozen=True)
class HintResponse:
    kind: str
    payload: Any
    hints: tuple[Hint, ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "payload": self.payload, "hints": [h.to_dict() for h in self.hints]}


def query_profile(profile: StatisticalProfile, query: ProfileQuery) -> HintResponse:
    """Answer a planner tool call from the profile alone (never raw data)."""
    if query.kind == "field_summary":
        fp = profile.field_profile(query.field or "")
        related = tuple(h for h in profile.hints if fp.name in h.fields)
        return HintResponse(kind=query.kind, payload=fp.to_dict(), hints=related)
    if query.kind == "facet_candidates":
        hits = tuple(h for h in profile.hints if h.hint_kind == "facet_candidate")
        return HintResponse(kind=query.kind, payload=[h.to_dict() for h in hits], hints=hits)
    if query.kind == "top_correlations":
        n = query.n if query.n is not None else 5
        corr = [p for p in profile.pairs if p.kind == "pearson_r"]
        corr.sort(key=lambda p: (-abs(p.value), p.field_a, p.field_b))
        chosen = corr[:n]
        names = {(p.field_a, p.field_b) for p in chosen}
        cited = tuple(
            h for h in profile.hints if h.hint_kind == "correlation" and (h.fields[0], h.fields[1]) in names
        )
        return HintResponse(kind=query.kind, payload=[p.to_dict() for p in chosen], hints=cited)
    if query.kind == "temporal_fields":
        hits = tuple(h for h in profile.hints if h.hint_kind == "trend_axis")
        names = [fp.name for fp in profile.per_field if fp.kind == "temporal"]
        return HintResponse(kind=query.kind, payload=names, hints=hits)
    if query.kind == "distinct_values":
        fp = profile.field_profile(query.field or "")
        limit = query.limit if query.limit is not None else TOP_K
        return HintResponse(kind=query.kind, payload=[[v, c] for v, c in fp.top_k[:limit]])
    raise UnknownQueryKind(query.kind)
