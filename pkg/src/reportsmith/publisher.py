"""Content-addressed artifact storage and columnar materialization.

Every artifact is named by the SHA-256 of its bytes, which makes writes
idempotent and stage caching sound. Derived datasets are written as parquet
with pinned writer settings so identical row sets produce identical digests
across runs.
"""

from __future__ import annotations

import hashlib
import io
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import polars as pl

from .errors import StoreUnavailable

ARTIFACT_KINDS = {
    "derived_parquet": ".parquet",
    "chart_json": ".json",
    "report_manifest": ".json",
    "trace_doc": ".md",
    "html_bundle_member": "",  # extension taken from the logical name
}

# Writer settings are part of the artifact contract: changing them changes
# every derived digest.
_PARQUET_COMPRESSION = "uncompressed"


def content_key(data: bytes) -> str:
    """Lowercase hex SHA-256 of the artifact bytes."""
    return hashlib.sha256(data).hexdigest()


def store_key_for(digest: str, kind: str, logical_name: str) -> str:
    ext = ARTIFACT_KINDS[kind]
    if kind == "html_bundle_member":
        suffix = Path(logical_name).suffix
        ext = suffix if suffix else ".bin"
    return f"artifacts/{digest[:2]}/{digest}{ext}"


@dataclass(frozen=True)
class ArtifactRef:
    digest: str
    kind: str
    logical_name: str
    byte_size: int
    store_key: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "digest": self.digest,
            "kind": self.kind,
            "logical_name": self.logical_name,
            "byte_size": self.byte_size,
            "store_key": self.store_key,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ArtifactRef":
        return cls(
            digest=d["digest"],
            kind=d["kind"],
            logical_name=d["logical_name"],
            byte_size=int(d["byte_size"]),
            store_key=d["store_key"],
        )


class ObjectStore:
    """Interface for content-addressed byte storage.

    put() must be idempotent for identical bytes; get() must return exactly
    the stored bytes. The filesystem backend below is the reference
    implementation; S3-compatible backends can implement the same surface.
    """

    def put(self, key: str, data: bytes) -> None:
        raise NotImplementedError

    def get(self, key: str) -> bytes:
        raise NotImplementedError

    def exists(self, key: str) -> bool:
        raise NotImplementedError


class FilesystemStore(ObjectStore):
    """Store keys map 1:1 onto files under a root directory.

    Writes go through a temp file + rename so concurrent identical puts are
    safe and interrupted writes never leave a partial object behind.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StoreUnavailable(f"cannot create store root {root}: {exc}") from exc

    def _path(self, key: str) -> Path:
        return self.root / key

    def put(self, key: str, data: bytes) -> None:
        path = self._path(key)
        if path.exists():
            return  # content-addressed: identical bytes already present
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".put-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                os.replace(tmp, path)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)
        except OSError as exc:
            raise StoreUnavailable(f"write failed for {key}: {exc}") from exc

    def get(self, key: str) -> bytes:
        path = self._path(key)
        try:
            return path.read_bytes()
        except OSError as exc:
            raise StoreUnavailable(f"read failed for {key}: {exc}") from exc

    def exists(self, key: str) -> bool:
        return self._path(key).exists()


_KIND_TO_POLARS = {
    "quantitative": pl.Float64,
    "temporal": None,  # resolved per column: Int64 for year-like, Utf8 for ISO dates
    "ordinal": pl.Utf8,
    "nominal": pl.Utf8,
    "boolean": pl.Boolean,
    "identifier": pl.Utf8,
    "unknown": pl.Utf8,
}


def _polars_dtype(kind: str, values: Sequence[Any]):
    if kind == "quantitative":
        if all(v is None or (isinstance(v, int) and not isinstance(v, bool)) for v in values):
            return pl.Int64
        return pl.Float64
    if kind == "temporal":
        if all(v is None or isinstance(v, int) for v in values):
            return pl.Int64
        return pl.Utf8
    return _KIND_TO_POLARS.get(kind, pl.Utf8)


def rows_to_frame(rows: Sequence[Sequence[Any]], result_schema: Sequence[tuple[str, str]]) -> pl.DataFrame:
    """Build a typed frame from row tuples plus (name, kind) pairs."""
    columns = {}
    for idx, (name, kind) in enumerate(result_schema):
        values = [row[idx] for row in rows]
        dtype = _polars_dtype(kind, values)
        if dtype is pl.Float64:
            values = [None if v is None else float(v) for v in values]
        elif dtype is pl.Boolean:
            values = [None if v is None else bool(v) for v in values]
        columns[name] = pl.Series(name, values, dtype=dtype)
    return pl.DataFrame(columns)


def frame_to_parquet_bytes(frame: pl.DataFrame) -> bytes:
    buf = io.BytesIO()
    frame.write_parquet(buf, compression=_PARQUET_COMPRESSION, statistics=True)
    return buf.getvalue()


def materialize(
    rows: Sequence[Sequence[Any]],
    result_schema: Sequence[tuple[str, str]],
    store: ObjectStore,
    logical_name: str,
) -> ArtifactRef:
    """Persist a derived result set as a content-addressed parquet artifact.

    Zero rows are fine; an empty schema is not.
    """
    if not result_schema:
        raise ValueError("materialize requires a non-empty result schema")
    frame = rows_to_frame(rows, result_schema)
    data = frame_to_parquet_bytes(frame)
    digest = content_key(data)
    key = store_key_for(digest, "derived_parquet", logical_name)
    store.put(key, data)
    return ArtifactRef(
        digest=digest,
        kind="derived_parquet",
        logical_name=logical_name,
        byte_size=len(data),
        store_key=key,
    )


def put_report_asset(data: bytes, kind: str, logical_name: str, store: ObjectStore) -> ArtifactRef:
    """Store a non-columnar report asset (chart doc, manifest, trace doc...)."""
    if kind not in ARTIFACT_KINDS:
        raise ValueError(f"unknown artifact kind: {kind}")
    digest = content_key(data)
    key = store_key_for(digest, kind, logical_name)
    store.put(key, data)
    return ArtifactRef(digest=digest, kind=kind, logical_name=logical_name, byte_size=len(data), store_key=key)


def load_parquet_artifact(ref: ArtifactRef, store: ObjectStore) -> pl.DataFrame:
    return pl.read_parquet(io.BytesIO(store.get(ref.store_key)))
