"""White-box chart recommendation: enumerate candidates, score, take the min.

The search space is tiny (at most four bound fields), so instead of an
external constraint solver the recommender exhaustively enumerates the
mark/channel/scale/aggregate/bin product, filters by hard validity rules
H1-H8, and sums weighted soft costs from an editable knowledge file.
Deleting or reweighting a soft rule changes recommendations without code
changes; ties break on the lexicographic order of a candidate's canonical
serialization.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Sequence

from .errors import NoBindableFields, NoValidCandidate
from .publisher import ArtifactRef

CHANNELS = ("x", "y", "color", "size", "facet")
MARKS = ("point", "bar", "line", "area", "tick", "rect")
DISCRETE_KINDS = ("nominal", "ordinal", "boolean", "identifier")
MAX_BOUND_FIELDS = 4
DECISION_LOG_TOP = 5


def load_viz_knowledge(path: str | Path | None = None) -> dict[str, Any]:
    if path is None:
        path = Path(__file__).parent / "assets" / "viz_knowledge.json"
    return json.loads(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class BoundField:
    field: str
    role: str
    kind: str
    stats: dict[str, Any]  # distinct_count, skewness?, has_nonpositive?, orders_of_magnitude?, min, max, normalized_entropy

    def to_dict(self) -> dict[str, Any]:
        return {"field": self.field, "role": self.role, "kind": self.kind, "stats": dict(self.stats)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BoundField":
        return cls(d["field"], d["role"], d["kind"], dict(d["stats"]))


@dataclass
class PartialSpec:
    insight_id: str
    task: str
    bound_fields: list[BoundField]
    dropped_fields: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "insight_id": self.insight_id,
            "task": self.task,
            "bound_fields": [bf.to_dict() for bf in self.bound_fields],
            "dropped_fields": list(self.dropped_fields),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PartialSpec":
        return cls(
            insight_id=d["insight_id"],
            task=d["task"],
            bound_fields=[BoundField.from_dict(bf) for bf in d["bound_fields"]],
            dropped_fields=list(d.get("dropped_fields", [])),
        )


@dataclass(frozen=True)
class Encoding:
    channel: str
    field: str | None  # None only for synthetic count encodings
    scale: str
    aggregate: str = "none"
    bin: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"channel": self.channel, "field": self.field, "scale": self.scale, "aggregate": self.aggregate, "bin": self.bin}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Encoding":
        return cls(d["channel"], d.get("field"), d["scale"], d.get("aggregate", "none"), d.get("bin"))


@dataclass
class CompleteSpec:
    mark: str
    encodings: list[Encoding]
    cost: float
    decision_log: list[dict[str, Any]] = field(default_factory=list)

    def encoding(self, channel: str) -> Encoding | None:
        for enc in self.encodings:
            if enc.channel == channel:
                return enc
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "mark": self.mark,
            "encodings": [e.to_dict() for e in self.encodings],
            "cost": self.cost,
            "decision_log": self.decision_log,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CompleteSpec":
        return cls(
            mark=d["mark"],
            encodings=[Encoding.from_dict(e) for e in d["encodings"]],
            cost=float(d["cost"]),
            decision_log=list(d.get("decision_log", [])),
        )


def canonical_key(mark: str, encodings: Sequence[Encoding]) -> str:
    """Serialization used for deterministic tie-breaking.

    Channel-ordered compact form; lexicographic comparison therefore prefers
    the smaller mark name first, then the smaller x-channel binding, and so
    on. With template-derived column names this lands discrete fields on x
    for tied bar orientations.
    """
    parts = [f"mark={mark}"]
    by_channel = {e.channel: e for e in encodings}
    for channel in CHANNELS:
        enc = by_channel.get(channel)
        if enc is None:
            continue
        parts.append(f"{channel}={enc.field if enc.field is not None else '(count)'}:{enc.scale}:{enc.aggregate}:bin={enc.bin}")
    return ";".join(parts)


# --- partial construction ------------------------------------------------------


def build_partial_spec(derived, plan) -> PartialSpec:
    """One bound field per role-carrying result column; stats from the mini-profile."""
    profiles = {fp.name: fp for fp in derived.mini_profile}
    roles = derived.final_query.roles
    bound: list[BoundField] = []
    dropped: list[str] = []
    for name, kind in derived.result_schema:
        role = roles.get(name)
        if role is None:
            continue
        fp = profiles[name]
        stats = {
            "distinct_count": fp.distinct_count,
            "skewness": fp.skewness,
            "has_nonpositive": fp.has_nonpositive,
            "orders_of_magnitude": fp.orders_of_magnitude,
            "min": fp.min,
            "max": fp.max,
            "normalized_entropy": fp.normalized_entropy,
        }
        if len(bound) >= MAX_BOUND_FIELDS:
            dropped.append(name)
            continue
        bound.append(BoundField(field=name, role=role, kind=kind, stats=stats))
    if not bound:
        raise NoBindableFields(f"{plan.insight_id}: no role-carrying result columns")
    return PartialSpec(insight_id=plan.insight_id, task=plan.task, bound_fields=bound, dropped_fields=dropped)


# --- candidate generation ---------------------------------------------------------


def _is_discrete(bf: BoundField) -> bool:
    return bf.kind in DISCRETE_KINDS


def _positional_discrete(enc: Encoding, by_field: dict[str, BoundField]) -> bool:
    if enc.field is None:
        return False
    if enc.bin is not None:
        return True
    bf = by_field[enc.field]
    return _is_discrete(bf) or bf.kind == "temporal"


def _scale_options(bf: BoundField, channel: str, binned: bool) -> tuple[str, ...]:
    if bf.kind == "quantitative":
        if binned or channel in ("color", "size"):
            return ("linear",)
        return ("linear", "log", "symlog")
    if bf.kind == "temporal":
        return ("temporal",) if channel in ("x", "y") else ("ordinal",)
    return ("ordinal",)


def _channel_allowed(bf: BoundField, channel: str) -> bool:
    if channel in ("x", "y"):
        # detail is table-side context by definition; it never takes an axis
        return bf.role != "detail"
    if channel == "size":
        return bf.kind == "quantitative"
    if channel in ("color", "facet"):
        return bf.kind != "temporal"  # time belongs on a positional axis
    return True


def enumerate_candidates(
    partial: PartialSpec,
    knowledge: dict[str, Any] | None = None,
) -> list[CompleteSpec]:
    """Full deterministic candidate list, hard-constraint filtered, costed.

    Synthetic count encodings on y are generated only for distribution tasks
    or measure-free partials; everything else must place real fields.
    """
    knowledge = knowledge if knowledge is not None else load_viz_knowledge()
    gen = knowledge.get("generation", {})
    bin_count = int(gen.get("bin_bucket_count", 20))
    fields = partial.bound_fields
    by_field = {bf.field: bf for bf in fields}
    has_measure = any(bf.role == "measure" for bf in fields)
    allow_count = partial.task == "distribution" or not has_measure

    candidates: list[CompleteSpec] = []
    channel_options: list[tuple[str | None, ...]] = []
    for bf in fields:
        opts: list[str | None] = [c for c in CHANNELS if _channel_allowed(bf, c)]
        opts.append(None)
        channel_options.append(tuple(opts))

    for mark in MARKS:
        for assignment in itertools.product(*channel_options):
            used = [c for c in assignment if c is not None]
            if len(used) != len(set(used)):
                continue
            if "x" not in used:
                continue
            needs_count = "y" not in used
            if needs_count and not allow_count:
                continue
            field_on: dict[str, BoundField] = {
                channel: fields[i] for i, channel in enumerate(assignment) if channel is not None
            }
            for encodings in _expand_encodings(mark, field_on, needs_count, bin_count):
                if not _passes_hard_constraints(mark, encodings, by_field, fields, knowledge):
                    continue
                total, reasons = cost_with_reasons(mark, encodings, partial, knowledge)
                candidates.append(CompleteSpec(mark=mark, encodings=list(encodings), cost=total, decision_log=[{"reasons": reasons}]))
    if not candidates:
        raise NoValidCandidate(f"{partial.insight_id}: hard constraints eliminated every candidate")
    return candidates


def _expand_encodings(
    mark: str,
    field_on: dict[str, BoundField],
    needs_count: bool,
    bin_count: int,
) -> Iterator[tuple[Encoding, ...]]:
    channels = sorted(field_on.keys(), key=CHANNELS.index)
    per_channel: list[list[Encoding]] = []
    for channel in channels:
        bf = field_on[channel]
        options: list[Encoding] = []
        bins: tuple[int | None, ...] = (None,)
        # Binning is a frequency device: only offered under a count y.
        if channel == "x" and bf.kind == "quantitative" and needs_count:
            bins = (None, bin_count)
        for b in bins:
            for scale in _scale_options(bf, channel, binned=b is not None):
                for aggregate in _aggregate_options(mark, channel, bf, field_on, b):
                    options.append(Encoding(channel=channel, field=bf.field, scale=scale, aggregate=aggregate, bin=b))
        per_channel.append(options)
    if needs_count:
        per_channel.append([Encoding(channel="y", field=None, scale="linear", aggregate="count")])
    for combo in itertools.product(*per_channel):
        yield combo


def _aggregate_options(
    mark: str,
    channel: str,
    bf: BoundField,
    field_on: dict[str, BoundField],
    binned: int | None,
) -> tuple[str, ...]:
    """Aggregates are offered only where a hard constraint can demand them
    (bar/rect); derived data arrives pre-aggregated, so other marks plot raw
    columns."""
    if bf.kind != "quantitative" or binned is not None:
        return ("none",)
    if mark == "bar" and channel in ("x", "y"):
        return ("none", "sum", "mean")
    if mark == "rect" and channel in ("x", "y", "color"):
        return ("none", "sum", "mean")
    return ("none",)


def _passes_hard_constraints(
    mark: str,
    encodings: Sequence[Encoding],
    by_field: dict[str, BoundField],
    fields: Sequence[BoundField],
    knowledge: dict[str, Any],
) -> bool:
    return not hard_violations(mark, encodings, by_field, fields, knowledge)


def hard_violations(
    mark: str,
    encodings: Sequence[Encoding],
    by_field: dict[str, BoundField],
    fields: Sequence[BoundField],
    knowledge: dict[str, Any],
) -> list[str]:
    """H1-H8 as named violations; empty list means the candidate is valid."""
    hard = knowledge.get("hard", {})
    facet_lo = int(hard.get("facet_min_distinct", 2))
    facet_hi = int(hard.get("facet_max_distinct", 12))
    color_max = int(hard.get("color_max_nominal_distinct", 10))

    out: list[str] = []
    by_channel = {e.channel: e for e in encodings}
    x = by_channel.get("x")
    y = by_channel.get("y")
    if x is None or y is None:
        out.append("H-structural: x and y must both be assigned")
        return out

    for enc in encodings:
        bf = by_field.get(enc.field) if enc.field else None
        if enc.scale == "log":
            if bf is None or bf.stats.get("min") is None or not bf.stats["min"] > 0:
                out.append(f"H1: log scale on non-positive domain ({enc.channel})")

    if mark in ("line", "area"):
        ordered = x.bin is not None
        if x.field is not None:
            xf = by_field[x.field]
            ordered = ordered or xf.kind in ("temporal", "ordinal")
        if not ordered:
            out.append("H2: line/area require ordered x")

    if mark == "bar":
        discrete_pos = [e for e in (x, y) if _positional_discrete(e, by_field)]
        quant_pos = [e for e in (x, y) if not _positional_discrete(e, by_field)]
        if len(discrete_pos) != 1:
            out.append("H3: bar requires exactly one discrete positional channel")
        elif not quant_pos or quant_pos[0].aggregate == "none":
            out.append("H3: bar requires an aggregated quantitative counterpart")

    facet = by_channel.get("facet")
    if facet is not None and facet.field is not None:
        ff = by_field[facet.field]
        if not _is_discrete(ff):
            out.append("H4: facet field must be discrete")
        elif not facet_lo <= ff.stats.get("distinct_count", 0) <= facet_hi:
            out.append(f"H4: facet cardinality outside {facet_lo}..{facet_hi}")

    color = by_channel.get("color")
    if color is not None and color.field is not None:
        cf = by_field[color.field]
        if _is_discrete(cf) and cf.stats.get("distinct_count", 0) > color_max:
            out.append(f"H5: color cardinality above {color_max}")

    size = by_channel.get("size")
    if size is not None and size.field is not None and by_field[size.field].kind != "quantitative":
        out.append("H6: size requires a quantitative field")

    if mark == "rect":
        if not (_positional_discrete(x, by_field) and _positional_discrete(y, by_field)):
            out.append("H7: rect requires two discrete positional channels")
        elif color is None or color.field is None or by_field[color.field].kind != "quantitative" or color.aggregate == "none":
            out.append("H7: rect requires an aggregated measure on color")

    if len(fields) <= len(CHANNELS):
        bound_names = {e.field for e in encodings if e.field}
        for bf in fields:
            if bf.role in ("measure", "dimension") and bf.field not in bound_names:
                out.append(f"H8: planned {bf.role} field '{bf.field}' left unbound")
    return out


# --- soft costs ---------------------------------------------------------------------


def _facet_evidence(bf: BoundField, rule: dict[str, Any]) -> bool:
    if not _is_discrete(bf):
        return False
    distinct = bf.stats.get("distinct_count", 0)
    entropy = bf.stats.get("normalized_entropy")
    lo = rule.get("min_distinct", 2)
    hi = rule.get("max_distinct", 12)
    h_min = rule.get("min_normalized_entropy", 0.5)
    return lo <= distinct <= hi and entropy is not None and entropy >= h_min


def _skew_triggered(bf: BoundField, rule: dict[str, Any]) -> bool:
    om = bf.stats.get("orders_of_magnitude")
    skew = bf.stats.get("skewness")
    if om is not None and om >= rule.get("trigger_orders_of_magnitude", 3):
        return True
    return skew is not None and abs(skew) >= rule.get("trigger_abs_skewness", 2)


def cost_with_reasons(
    mark: str,
    encodings: Sequence[Encoding],
    partial: PartialSpec,
    knowledge: dict[str, Any],
) -> tuple[float, list[str]]:
    """Sum of fired soft-rule weights plus the fired reason codes."""
    soft = knowledge.get("soft", {})
    by_field = {bf.field: bf for bf in partial.bound_fields}
    by_channel = {e.channel: e for e in encodings}
    total = 0.0
    reasons: list[str] = []

    for rule_id in ("S1", "S2", "S3"):
        rule = soft.get(rule_id)
        if rule and partial.task == rule.get("task") and mark != rule.get("mark"):
            total += rule.get("other_mark_cost", 0)
            reasons.append(f"{rule_id}:mark={mark}")

    s4 = soft.get("S4")
    if s4:
        for channel in ("x", "y"):
            enc = by_channel.get(channel)
            if enc is None or enc.field is None or enc.bin is not None:
                continue
            bf = by_field[enc.field]
            if bf.kind != "quantitative" or not _skew_triggered(bf, s4):
                continue
            if enc.scale == "linear":
                total += s4.get("linear_cost", 10)
                reasons.append(f"S4:linear@{channel}")
            elif enc.scale == "log":
                total += s4.get("log_cost", 2)
                reasons.append(f"S4:log@{channel}")
            elif enc.scale == "symlog":
                weight = (
                    s4.get("symlog_nonpositive_cost", 2)
                    if bf.stats.get("has_nonpositive")
                    else s4.get("symlog_positive_cost", 4)
                )
                total += weight
                reasons.append(f"S4:symlog@{channel}")

    s5 = soft.get("S5")
    x = by_channel.get("x")
    if s5 and mark == "bar" and x is not None and x.bin is not None:
        total += s5.get("cost", 2)
        reasons.append("S5:binned-bar-x")

    s6 = soft.get("S6")
    facet = by_channel.get("facet")
    if s6 and facet is not None and facet.field is not None and _facet_evidence(by_field[facet.field], s6):
        total += s6.get("bonus", -3)
        reasons.append("S6:facet-evidence")

    s7 = soft.get("S7")
    if s7:
        bound_names = {e.field for e in encodings if e.field}
        for bf in partial.bound_fields:
            if bf.field not in bound_names:
                total += s7.get("cost", 4)
                reasons.append(f"S7:unused={bf.field}")

    s8 = soft.get("S8")
    if s8 and facet is not None and facet.field is not None:
        if by_field[facet.field].stats.get("distinct_count", 99) <= s8.get("max_distinct_for_color", 3):
            total += s8.get("cost", 2)
            reasons.append("S8:facet-too-small")

    s9 = soft.get("S9")
    if s9:
        for enc in encodings:
            if enc.aggregate == "sum":
                total += s9.get("sum_cost", 1)
                reasons.append(f"S9:sum@{enc.channel}")

    s10 = soft.get("S10")
    if s10:
        for channel in ("x", "y"):
            enc = by_channel.get(channel)
            if enc is not None and enc.field is not None and by_field[enc.field].kind == "identifier":
                total += s10.get("cost", 6)
                reasons.append(f"S10:identifier@{channel}")

    return total, reasons


def cost(candidate: CompleteSpec, partial: PartialSpec, knowledge: dict[str, Any] | None = None) -> float:
    knowledge = knowledge if knowledge is not None else load_viz_knowledge()
    total, _ = cost_with_reasons(candidate.mark, candidate.encodings, partial, knowledge)
    return total


def solve(partial: PartialSpec, knowledge: dict[str, Any] | None = None) -> CompleteSpec:
    """Min-cost candidate; ties break on canonical serialization order."""
    knowledge = knowledge if knowledge is not None else load_viz_knowledge()
    candidates = enumerate_candidates(partial, knowledge)
    ranked = sorted(candidates, key=lambda c: (c.cost, canonical_key(c.mark, c.encodings)))
    winner = ranked[0]
    log = []
    for rank, cand in enumerate(ranked[:DECISION_LOG_TOP], start=1):
        log.append(
            {
                "rank": rank,
                "cost": cand.cost,
                "mark": cand.mark,
                "encodings": canonical_key(cand.mark, cand.encodings),
                "reasons": cand.decision_log[0]["reasons"] if cand.decision_log else [],
            }
        )
    return CompleteSpec(mark=winner.mark, encodings=winner.encodings, cost=winner.cost, decision_log=log)


# --- render documents ---------------------------------------------------------------


_VEGA_TYPES = {
    "quantitative": "quantitative",
    "temporal": "temporal",
    "nominal": "nominal",
    "ordinal": "ordinal",
    "boolean": "nominal",
    "identifier": "nominal",
}


def to_render_doc(
    spec: CompleteSpec,
    artifact: ArtifactRef,
    partial: PartialSpec,
    knowledge: dict[str, Any] | None = None,
) -> bytes:
    """Emit the declarative chart document (Vega-Lite v5 subset) as bytes."""
    knowledge = knowledge if knowledge is not None else load_viz_knowledge()
    symlog_constant = knowledge.get("generation", {}).get("symlog_constant", 1)
    by_field = {bf.field: bf for bf in partial.bound_fields}
    encoding_doc: dict[str, Any] = {}
    for enc in sorted(spec.encodings, key=lambda e: CHANNELS.index(e.channel)):
        entry: dict[str, Any] = {}
        if enc.field is not None:
            entry["field"] = enc.field
            entry["type"] = _VEGA_TYPES[by_field[enc.field].kind]
        else:
            entry["type"] = "quantitative"
        if enc.aggregate != "none":
            entry["aggregate"] = enc.aggregate
        if enc.bin is not None:
            entry["bin"] = {"maxbins": enc.bin}
        if enc.scale == "log":
            entry["scale"] = {"type": "log"}
        elif enc.scale == "symlog":
            entry["scale"] = {"type": "symlog", "constant": symlog_constant}
        encoding_doc[enc.channel] = entry
    doc = {
        "data": {"url": artifact.store_key},
        "mark": spec.mark,
        "encoding": encoding_doc,
    }
    return (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode("utf-8")
