"""Service configuration: one YAML/JSON file plus environment-variable
overrides for secrets. Invalid config fails fast naming the offending key."""

from __future__ import annotations

import os
from typing import Optional

import yaml
from pydantic import BaseModel, Field, ValidationError

from .verifier import ChatEndpointConfig

__all__ = ["ServiceConfig", "ConfigError", "load_config"]

ENV_ENDPOINT_URL = "TOOLVERIFY_ENDPOINT_URL"
ENV_AUTH_TOKEN = "TOOLVERIFY_API_TOKEN"
ENV_SANDBOX_TIMEOUT = "TOOLVERIFY_SANDBOX_TIMEOUT"


class ConfigError(ValueError):
    pass


class EndpointSettings(BaseModel):
    base_url: str = ""
    model: str = ""
    temperature: float = 0.0
    max_turns: int = Field(default=4, ge=1)
    max_tokens_per_turn: int = Field(default=2048, ge=1)

    def to_chat_config(self) -> ChatEndpointConfig:
        return ChatEndpointConfig(
            base_url=self.base_url,
            model=self.model,
            temperature=self.temperature,
            max_turns=self.max_turns,
            max_tokens_per_turn=self.max_tokens_per_turn,
        )


class EquivSettings(BaseModel):
    decimal_round_places: int = Field(default=2, ge=0)
    rel_tol: float = Field(default=1e-4, gt=0)
    order_sensitive: bool = False
    strip_units: bool = True


class SandboxSettings(BaseModel):
    timeout: float = Field(default=10.0, gt=0)
    max_output: int = Field(default=65536, gt=0)
    memory_bytes: int = Field(default=512 * 1024 * 1024, gt=0)
    pool_size: int = Field(default=2, ge=1)
    runner_command: Optional[list[str]] = None  # None => inline local executor


class ServiceConfig(BaseModel):
    endpoint: EndpointSettings = EndpointSettings()
    equiv: EquivSettings = EquivSettings()
    sandbox: SandboxSettings = SandboxSettings()
    tools: list[str] = ["python_interpreter", "unit_conversion"]
    parallelism: int = Field(default=4, ge=1)
    listen_host: str = "127.0.0.1"
    listen_port: int = Field(default=8080, ge=1, le=65535)
    include_transcripts: bool = False
    audit_dir: Optional[str] = None


def load_config(path: Optional[str] = None) -> ServiceConfig:
    data = {}
    if path:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    try:
        cfg = ServiceConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"invalid config at {loc}: {first['msg']}")
    if os.environ.get(ENV_ENDPOINT_URL):
        cfg.endpoint.base_url = os.environ[ENV_ENDPOINT_URL]
    if os.environ.get(ENV_SANDBOX_TIMEOUT):
        try:
            cfg.sandbox.timeout = float(os.environ[ENV_SANDBOX_TIMEOUT])
        except ValueError:
            raise ConfigError(f"invalid {ENV_SANDBOX_TIMEOUT}: must be a number")
    return cfg
