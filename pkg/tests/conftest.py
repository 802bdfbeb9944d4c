from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import reportsmith
from reportsmith.config import PipelineConfig
from reportsmith.gateway import LlmGateway, RoutingTable, StubBackend
from reportsmith.ingest import apply_schema, describe_dataset, load_dataset, refine_fields
from reportsmith.profiler import HintRuleSet, profile_table


@pytest.fixture(scope="session")
def sample_path() -> str:
    return reportsmith.sample_dataset_path()


@pytest.fixture()
def stub_gateway() -> LlmGateway:
    return LlmGateway(RoutingTable.default(), StubBackend(None))


@pytest.fixture(scope="session")
def sample_parts(sample_path):
    """(schema, typed table, profile) of the bundled sample dataset."""
    table = load_dataset(sample_path)
    fields = refine_fields(table)
    typed = apply_schema(table, fields)
    gateway = LlmGateway(RoutingTable.default(), StubBackend(None))
    schema = describe_dataset(fields, [list(r) for r in typed.rows()[:5]], gateway, typed.row_count)
    profile = profile_table(typed, schema, HintRuleSet.default())
    return schema, typed, profile


def make_config(sample_path: str, out_dir: str, **overrides) -> PipelineConfig:
    base = dict(
        data_uri=sample_path,
        goal="Summarize publication impact trends",
        insight_count=3,
        out_dir=out_dir,
        llm_backend="stub",
        workers=1,
    )
    base.update(overrides)
    return PipelineConfig(**base)


@pytest.fixture()
def run_config(sample_path, tmp_path):
    return make_config(sample_path, str(tmp_path / "out"))


def pytest_runtest_logreport(report):
    """One visible PASS/FAIL line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        outcome = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\n[ACCEPTANCE] {outcome}: {name}")
