"""Show the white-box chart recommender choosing and explaining a chart.

The showcase case: two heavy-tailed measures with zeros plus a small
dimension. The solver should land on a faceted scatterplot with symmetric-log
axes, and deleting one rule from the knowledge table should flip the scales
to linear. Run it:

    python demos/02_chart_recommendation.py
"""

from __future__ import annotations

import copy

from reportsmith.vizrec import BoundField, PartialSpec, load_viz_knowledge, solve


def skewed(name: str) -> BoundField:
    return BoundField(
        field=name,
        role="measure",
        kind="quantitative",
        stats={"distinct_count": 80, "min": 0.0, "max": 50_000.0, "skewness": 4.8,
               "has_nonpositive": True, "orders_of_magnitude": 3.6, "normalized_entropy": None},
    )


def main() -> None:
    partial = PartialSpec(
        insight_id="demo-correlation",
        task="correlation",
        bound_fields=[
            skewed("Downloads"),
            skewed("Citations"),
            BoundField(field="Conference", role="detail", kind="nominal",
                       stats={"distinct_count": 4, "min": None, "max": None, "skewness": None,
                              "has_nonpositive": None, "orders_of_magnitude": None, "normalized_entropy": 0.99}),
        ],
    )

    spec = solve(partial)
    print(f"chosen: mark={spec.mark} cost={spec.cost}")
    for enc in spec.encodings:
        print(f"  {enc.channel}: {enc.field} scale={enc.scale} aggregate={enc.aggregate}")

    print("\ndecision log (top candidates):")
    for entry in spec.decision_log:
        print(f"  #{entry['rank']} cost={entry['cost']:<5} {entry['encodings']}")
        if entry["reasons"]:
            print(f"      fired: {', '.join(entry['reasons'])}")

    print("\nnow delete the skew-vs-scale rule (S4) from the knowledge table...")
    edited = copy.deepcopy(load_viz_knowledge())
    del edited["soft"]["S4"]
    respec = solve(partial, edited)
    scales = {e.channel: e.scale for e in respec.encodings}
    print(f"re-solved scales: {scales}  (the symlog preference lived in S4, not in code)")


if __name__ == "__main__":
    main()
