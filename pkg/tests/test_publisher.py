from __future__ import annotations

import threading

import pytest

from reportsmith.errors import StoreUnavailable
from reportsmith.publisher import (
    ArtifactRef,
    FilesystemStore,
    content_key,
    load_parquet_artifact,
    materialize,
    put_report_asset,
    store_key_for,
)

# The SHA-256 of the empty input, as published in FIPS 180-4 test vectors.
EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def test_content_key_empty_bytes_matches_reference():
    assert content_key(b"") == EMPTY_SHA256


def test_content_key_is_pure():
    data = b"the same bytes"
    assert content_key(data) == content_key(data)


def test_single_bit_flip_changes_digest():
    data = bytearray(b"reportsmith artifact payload")
    base = content_key(bytes(data))
    data[0] ^= 0x01
    assert content_key(bytes(data)) != base


def test_store_key_layout():
    digest = "ab" + "0" * 62
    key = store_key_for(digest, "derived_parquet", "x.parquet")
    assert key == f"artifacts/ab/{digest}.parquet"
    assert store_key_for(digest, "trace_doc", "t.md").endswith(".md")
    assert store_key_for(digest, "html_bundle_member", "index.html").endswith(".html")


def test_filesystem_store_roundtrip(tmp_path):
    store = FilesystemStore(tmp_path)
    store.put("artifacts/aa/x.bin", b"payload")
    assert store.exists("artifacts/aa/x.bin")
    assert store.get("artifacts/aa/x.bin") == b"payload"
    with pytest.raises(StoreUnavailable):
        store.get("artifacts/aa/missing.bin")


def test_put_is_idempotent_for_identical_bytes(tmp_path):
    store = FilesystemStore(tmp_path)
    rows = [(1, "a"), (2, "b")]
    schema = [("n", "quantitative"), ("s", "nominal")]
    ref1 = materialize(rows, schema, store, "one.parquet")
    ref2 = materialize(rows, schema, store, "one.parquet")
    assert ref1.digest == ref2.digest
    objects = [p for p in tmp_path.rglob("*") if p.is_file()]
    assert len(objects) == 1


def test_concurrent_puts_leave_one_object(tmp_path):
    store = FilesystemStore(tmp_path)
    data = b"same bytes from many writers"
    key = f"artifacts/{content_key(data)[:2]}/{content_key(data)}.bin"
    threads = [threading.Thread(target=store.put, args=(key, data)) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert store.get(key) == data
    assert len([p for p in tmp_path.rglob("*") if p.is_file() and not p.name.startswith(".")]) == 1


def test_materialize_determinism_across_calls(tmp_path):
    rows = [(2020, "VIS", 10.5), (2021, "CHI", None)]
    schema = [("Year", "temporal"), ("Conf", "nominal"), ("Score", "quantitative")]
    a = materialize(rows, schema, FilesystemStore(tmp_path / "a"), "x.parquet")
    b = materialize(rows, schema, FilesystemStore(tmp_path / "b"), "x.parquet")
    assert a.digest == b.digest


def test_materialize_zero_rows(tmp_path):
    store = FilesystemStore(tmp_path)
    ref = materialize([], [("v", "quantitative")], store, "empty.parquet")
    frame = load_parquet_artifact(ref, store)
    assert frame.height == 0
    assert frame.columns == ["v"]


def test_materialize_requires_schema(tmp_path):
    with pytest.raises(ValueError):
        materialize([], [], FilesystemStore(tmp_path), "x.parquet")


def test_roundtrip_rows_identical(tmp_path):
    store = FilesystemStore(tmp_path)
    rows = [(1, "x", True), (2, "y", False), (3, None, None)]
    schema = [("n", "quantitative"), ("s", "nominal"), ("b", "boolean")]
    ref = materialize(rows, schema, store, "r.parquet")
    frame = load_parquet_artifact(ref, store)
    assert frame.rows() == rows


def test_put_report_asset_kinds(tmp_path):
    store = FilesystemStore(tmp_path)
    ref = put_report_asset(b"{}", "chart_json", "c.json", store)
    assert ref.kind == "chart_json"
    assert ref.store_key.endswith(".json")
    dup = put_report_asset(b"{}", "chart_json", "c.json", store)
    assert dup.digest == ref.digest
    with pytest.raises(ValueError):
        put_report_asset(b"", "bogus_kind", "x", store)


def test_artifact_ref_serialization_roundtrip():
    ref = ArtifactRef(digest="d" * 64, kind="chart_json", logical_name="c.json", byte_size=2, store_key="artifacts/dd/x.json")
    assert ArtifactRef.from_dict(ref.to_dict()) == ref


def test_put_failure_raises_store_unavailable(tmp_path):
    blocker = tmp_path / "artifacts"
    blocker.write_text("a file where a directory must go")
    store = FilesystemStore(tmp_path)
    with pytest.raises(StoreUnavailable):
        store.put("artifacts/aa/x.bin", b"payload")
