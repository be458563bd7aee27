"""Bridge configuration: JSON file plus environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

ENV_PORT = "BRIDGE_PORT"
ENV_MLM = "BRIDGE_MLM"
ENV_PARSER = "BRIDGE_PARSER"


@dataclass
class BridgeConfig:
    mlm: str
    parser: str | None = None
    host: str = "127.0.0.1"
    port: int = 8752
    top_k: int = 1
    max_concurrent: int = 4  # cap on simultaneous model invocations
    device: str = "cpu"

    def __post_init__(self) -> None:
        if not self.mlm:
            raise ValueError("a masked-LM model identifier is required")
        if not 1 <= int(self.port) <= 65535:
            raise ValueError(f"invalid port {self.port}")
        if self.top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {self.top_k}")
        if self.max_concurrent < 1:
            raise ValueError(f"max_concurrent must be >= 1, got {self.max_concurrent}")


def load_config(path: str | None = None, env: dict | None = None) -> BridgeConfig:
    """Read the JSON config file, then apply environment overrides."""
    env = os.environ if env is None else env
    raw: dict = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: expected a JSON object")
    known = {"mlm", "parser", "host", "port", "top_k", "max_concurrent", "device"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"{path}: unknown config key(s) {sorted(unknown)}")
    if ENV_PORT in env:
        raw["port"] = int(env[ENV_PORT])
    if ENV_MLM in env:
        raw["mlm"] = env[ENV_MLM]
    if ENV_PARSER in env:
        raw["parser"] = env[ENV_PARSER] or None
    if raw.get("parser") in ("null", "none", ""):
        raw["parser"] = None
    return BridgeConfig(**raw)
