"""Walk through the statistical profile of the bundled sample dataset.

The profile is the pipeline's single source of statistical truth: planning
and chart choice read these numbers instead of raw rows. Run it:

    python demos/01_profile_a_dataset.py
"""

from __future__ import annotations

import reportsmith
from reportsmith.ingest import apply_schema, load_dataset, refine_fields
from reportsmith.profiler import HintRuleSet, ProfileQuery, profile_table, query_profile
from reportsmith.ingest import DatasetSchema


def main() -> None:
    table = load_dataset(reportsmith.sample_dataset_path())
    fields = refine_fields(table)
    print("inferred kinds:")
    for f in fields:
        print(f"  {f.name:<20} {f.kind}")

    typed = apply_schema(table, fields)
    schema = DatasetSchema(dataset_digest="demo", fields=fields, description="demo", row_count=typed.row_count)
    profile = profile_table(typed, schema, HintRuleSet.default())

    downloads = profile.field_profile("Downloads")
    print(f"\nDownloads: skewness={downloads.skewness:.2f}, "
          f"orders_of_magnitude={downloads.orders_of_magnitude:.2f}, "
          f"zeros_present={downloads.has_nonpositive}")

    stamp = profile.field_profile("ReplicabilityStamp")
    print(f"ReplicabilityStamp: normalized_entropy={stamp.normalized_entropy:.4f} "
          "(too lopsided to facet by)")

    print("\nhints the planner will see:")
    for hint in profile.hints:
        print(f"  [{hint.rule_id}] {hint.hint_kind}: {', '.join(hint.fields)}  evidence={hint.evidence}")

    print("\nprofile tool answers (what the planning loop can query):")
    facets = query_profile(profile, ProfileQuery(kind="facet_candidates"))
    print("  facet_candidates ->", [h["fields"][0] for h in facets.payload])
    corr = query_profile(profile, ProfileQuery(kind="top_correlations", n=1))
    print("  top correlation  ->", corr.payload[0])


if __name__ == "__main__":
    main()
