"""Run configuration.

One JSON config file per run; the API key is never stored in the file and
comes from an environment variable instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

BACKEND_MODES = ("live", "record", "replay", "scripted")

DEFAULT_MODELS = {
    "1": "flash-large-context",
    "2": "flash-large-context",
    "3": "flash-large-context",
    "4": "flash-large-context",
    "5": "flash-reasoning",
}


@dataclass
class RunConfig:
    corpus_dir: str = "corpus"
    run_dir: str = "run"
    report_dir: str = "report"
    backend: str = "replay"
    endpoint_url: str = ""
    models: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_MODELS))
    temperature: float = 0.0
    batch_cap: int = 20
    worker_count: int = 1
    rpm_limit: int = 60
    retry_budget: int = 4
    jitter_seed: int = 0
    scripted_seed: int = 0
    context_budget: int = 1_000_000
    template_dir: str | None = None
    catalog_path: str | None = None
    api_base_url: str = "https://api.openalex.org"
    api_query: str = ""
    api_filters: dict[str, str] = field(default_factory=dict)
    mailto: str | None = None
    api_key_env: str = "SDGPB_API_KEY"

    def validate(self) -> None:
        if self.backend not in BACKEND_MODES:
            raise ConfigError(f"backend must be one of {BACKEND_MODES}, got {self.backend!r}")
        if self.batch_cap < 1:
            raise ConfigError("batch_cap must be >= 1")
        if self.worker_count < 1:
            raise ConfigError("worker_count must be >= 1")
        if self.rpm_limit < 1:
            raise ConfigError("rpm_limit must be >= 1")
        if self.retry_budget < 0:
            raise ConfigError("retry_budget must be >= 0")
        if self.backend == "live" and not self.endpoint_url:
            raise ConfigError("live backend requires endpoint_url")


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        cfg = RunConfig()
        cfg.validate()
        return cfg
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text("utf-8"))
    except ValueError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**data)
    cfg.validate()
    return cfg
