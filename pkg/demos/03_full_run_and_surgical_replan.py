"""Run the whole pipeline offline, then surgically regenerate one insight.

Equivalent CLI:

    reportsmith run --data <sample.csv> --goal "..." --insights 3 --out demo-out --llm stub
    reportsmith replan --run <id> --insight <id> --plan plan.json --out demo-out

Run it:

    python demos/03_full_run_and_surgical_replan.py
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

import reportsmith
from reportsmith import orchestrator
from reportsmith.config import PipelineConfig
from reportsmith.orchestrator import StageCache


def main() -> None:
    out = Path(tempfile.mkdtemp(prefix="reportsmith-demo-"))
    config = PipelineConfig(
        data_uri=reportsmith.sample_dataset_path(),
        goal="Summarize publication impact trends",
        insight_count=3,
        out_dir=str(out),
        llm_backend="stub",
    )
    manifest = orchestrator.run_pipeline(config)
    print(f"run {manifest.run_id}: bundle at {manifest.bundle_dir}")
    report = json.loads((Path(manifest.bundle_dir) / "report.json").read_text())
    for entry in report["insights"]:
        print(f"  - {entry['insight_id']}: {entry['narrative']['body_markdown'][:90]}...")

    # edit one plan: swap the trend measure from Downloads to Citations
    cache = StageCache(out / "cache")
    plan_key = [s for s in manifest.stages if s["stage"] == "plan"][0]["key"]
    plans = cache.get(plan_key)["record"]["plans"]
    target = plans[0]
    print(f"\nediting plan {target['insight_id']} (measure -> Citations), then replanning...")
    edited = dict(target)
    edited["fields"] = [["Year", "time"], ["Citations", "measure"]]
    edited["title"] = "Citations over Year"

    second = orchestrator.replan(out, manifest.run_id, target["insight_id"], edited)
    executed = [(s["stage"], s.get("insight_id")) for s in second.stages if s["cache"] in ("miss", "off")]
    hits = sum(1 for s in second.stages if s["cache"] == "hit")
    print(f"replanned run {second.run_id}: {len(executed)} stages executed, {hits} cache hits")
    for stage, insight in executed:
        print(f"  executed {stage}" + (f" [{insight}]" if insight else ""))


if __name__ == "__main__":
    main()
