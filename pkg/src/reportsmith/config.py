"""Pipeline configuration: defaults, reportsmith.toml, CLI flag merging.

Python 3.10 ships no TOML reader and this project pins a tiny dependency
surface, so the config file is parsed with a minimal TOML subset: comments,
[section] headers (flattened as ``section.key``), and string / integer /
float / boolean values. That covers every key the pipeline defines.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any

from .ingest import DEFAULT_NULL_SENTINELS

_KEY_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


def parse_toml_subset(text: str) -> dict[str, Any]:
    out: dict[str, Any] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ValueError(f"reportsmith.toml line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if not _KEY_RE.match(key):
            raise ValueError(f"reportsmith.toml line {lineno}: bad key {key!r}")
        full_key = f"{section}.{key}" if section else key
        out[full_key] = _parse_value(value.strip(), lineno)
    return out


def _parse_value(token: str, lineno: int) -> Any:
    if token.startswith('"') and token.endswith('"') and len(token) >= 2:
        return token[1:-1]
    if token in ("true", "false"):
        return token == "true"
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        raise ValueError(f"reportsmith.toml line {lineno}: unsupported value {token!r}") from None


@dataclass
class PipelineConfig:
    data_uri: str = ""
    goal: str = ""
    insight_count: int = 3
    audience_note: str | None = None
    out_dir: str = "out"
    llm_backend: str = "stub"  # stub | http
    fixtures_dir: str | None = None
    knowledge_dir: str | None = None
    rules_path: str | None = None
    viz_knowledge_path: str | None = None
    models_path: str | None = None
    null_sentinels: tuple[str, ...] = DEFAULT_NULL_SENTINELS
    max_repair_attempts: int = 3
    use_cache: bool = True
    workers: int = 4
    plan_overrides: dict[str, dict[str, Any]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["null_sentinels"] = list(self.null_sentinels)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        kwargs = {k: v for k, v in d.items() if k in known}
        if "null_sentinels" in kwargs:
            kwargs["null_sentinels"] = tuple(kwargs["null_sentinels"])
        return cls(**kwargs)


_TOML_KEYS = {
    "data": "data_uri",
    "goal": "goal",
    "insights": "insight_count",
    "out": "out_dir",
    "llm": "llm_backend",
    "rules": "rules_path",
    "viz_knowledge": "viz_knowledge_path",
    "models": "models_path",
    "fixtures": "fixtures_dir",
    "knowledge": "knowledge_dir",
    "audience_note": "audience_note",
    "max_repair_attempts": "max_repair_attempts",
    "use_cache": "use_cache",
    "workers": "workers",
}


def load_config(toml_path: str | Path | None, flag_values: dict[str, Any]) -> PipelineConfig:
    """Build config from file values, then let explicit flags win."""
    merged: dict[str, Any] = {}
    if toml_path is not None and Path(toml_path).exists():
        raw = parse_toml_subset(Path(toml_path).read_text(encoding="utf-8"))
        for key, value in raw.items():
            bare = key.split(".", 1)[-1]
            target = _TOML_KEYS.get(bare)
            if target is not None:
                merged[target] = value
    for key, value in flag_values.items():
        if value is not None:
            merged[key] = value
    return PipelineConfig.from_dict(merged)


def config_snapshot_json(config: PipelineConfig) -> str:
    return json.dumps(config.to_dict(), sort_keys=True, indent=2)
