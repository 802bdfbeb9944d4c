"""reportsmith: automated visual data reporting with auditable stages.

A tabular dataset plus a high-level goal goes in; a granular, reproducible
report comes out: profiled statistics, grounded insight plans, validated SQL
derivations, content-addressed parquet artifacts, solver-chosen charts,
cited narratives, and a dual output (static HTML bundle + per-insight trace
documents). Every model call routes through one gateway with a deterministic
offline mode.
"""

from .config import PipelineConfig, load_config
from .deriver import CandidateQuery, DerivedDataset, SqlEngine, ValidationResult, derive, draft_query, repair_query, validate_query
from .errors import ReportsmithError
from .gateway import GatewayRequest, GatewayResponse, HttpBackend, LlmGateway, ModelRoute, RoutingTable, StubBackend
from .ingest import (
    DatasetSchema,
    DirectoryKnowledgeSource,
    FieldSchema,
    RawTable,
    TypedTable,
    apply_schema,
    describe_dataset,
    expand_codes,
    load_dataset,
    refine_fields,
)
from .orchestrator import RunManifest, invalidate, render, replan, run_pipeline
from .planner import InsightPlan, Intent, fallback_plan, plan_insights, validate_plan
from .profiler import (
    FieldProfile,
    Hint,
    HintRuleSet,
    PairStat,
    ProfileQuery,
    StatisticalProfile,
    generate_hints,
    profile_field,
    profile_pairs,
    profile_table,
    query_profile,
)
from .publisher import ArtifactRef, FilesystemStore, ObjectStore, content_key, materialize, put_report_asset
from .reporter import Narrative, compose_report, emit_html, emit_trace_doc, narrate_insight
from .vizrec import (
    BoundField,
    CompleteSpec,
    Encoding,
    PartialSpec,
    build_partial_spec,
    cost,
    enumerate_candidates,
    solve,
    to_render_doc,
)

__version__ = "0.1.0"

SAMPLE_DATASET = "vis_papers_sample.csv"


def sample_dataset_path() -> str:
    """Bundled ~500-row sample dataset used by the demos and acceptance suite."""
    from pathlib import Path

    return str(Path(__file__).parent / "assets" / SAMPLE_DATASET)
