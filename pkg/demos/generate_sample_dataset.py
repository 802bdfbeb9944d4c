"""Regenerate the bundled sample dataset (seeded, so the CSV is reproducible).

The shape mirrors a publication-records table: a year column, a handful of
venues, two heavy-tailed count measures with zeros, a cryptic award code, and
a 99/1 binary stamp column that should never be suggested for faceting.
"""

from __future__ import annotations

import csv
import math
import random
from pathlib import Path

ROWS = 500
SEED = 7

OUT = Path(__file__).resolve().parent.parent / "src" / "reportsmith" / "assets" / "vis_papers_sample.csv"


def main() -> None:
    rng = random.Random(SEED)
    rows = []
    for i in range(ROWS):
        year = rng.randint(2015, 2024)
        conference = rng.choices(["VIS", "CHI", "EuroVis", "TVCG"], weights=[30, 30, 20, 20])[0]
        if rng.random() < 0.03:
            downloads = 0
        else:
            downloads = int(round(math.exp(rng.gauss(4.0, 1.5))))
        noise = math.exp(rng.gauss(0.0, 0.6))
        citations = int(round(0.3 * downloads * noise))
        award = rng.choices(["C", "HM", "BP"], weights=[85, 10, 5])[0]
        rows.append([year, conference, downloads, citations, award])

    # exactly 5 of 500 carry the stamp: normalized entropy of 99/1 ~ 0.0808
    stamped = set(rng.sample(range(ROWS), 5))
    for i, row in enumerate(rows):
        row.append("yes" if i in stamped else "no")

    OUT.parent.mkdir(parents=True, exist_ok=True)
    with OUT.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Year", "Conference", "Downloads", "Citations", "Award", "ReplicabilityStamp"])
        writer.writerows(rows)
    print(f"wrote {ROWS} rows to {OUT}")


if __name__ == "__main__":
    main()
