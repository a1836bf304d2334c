"""Run configuration: defaults overridden by environment variables, then a
JSON config file, then CLI flags.  The resolved values plus all three source
layers are echoed into every report so any run can be reproduced from its
own output.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .clients import (
    ClientConfig,
    ENV_CLASSIFIER_URL,
    ENV_EMBEDDER_URL,
    ENV_JUDGE_URL,
)
from .errors import IOFailure, SchemaViolation
from .rewards import RewardWeights
from .selection import CompositeWeights, SelectionConfig


@dataclass
class RunConfig:
    # metric parameters
    alpha: float = 0.5
    tau: float = 0.8
    theta: int = 1
    flatten: str = "joint"  # joint | incoming
    # selection
    seed: int = 0
    k: int | None = None
    strategy: str = "greedy"
    gap_metric: str = "js"
    mc_iterations: int = 1000
    greedy_batch: int = 1
    stage1_k: int | None = None
    # clients
    stub: bool = False
    classifier_url: str = ""
    judge_url: str = ""
    embedder_url: str = ""
    timeout_ms: int = 10_000
    max_retries: int = 2
    # rewards / composite
    banned_patterns: str = ""
    reward: dict[str, Any] = field(default_factory=dict)
    composite: dict[str, Any] = field(default_factory=dict)

    def reward_weights(self) -> RewardWeights:
        r = self.reward
        return RewardWeights(
            lambda1=float(r.get("lambda1", 1.0)),
            lambda2=float(r.get("lambda2", 1.0)),
            lambda3=float(r.get("lambda3", 1.0)),
            alpha=float(r.get("alpha", 0.5)),
            beta=float(r.get("beta", 0.5)),
            length_band=(int(r.get("length_min", 2)), int(r.get("length_max", 120))),
            repeat_threshold=float(r.get("repeat_threshold", 0.8)),
        )

    def composite_weights(self) -> CompositeWeights:
        c = self.composite
        return CompositeWeights(
            w_style=float(c.get("w_style", 1.0)),
            w_result=float(c.get("w_result", 1.0)),
            w_route=float(c.get("w_route", 1.0)),
            w_reward=float(c.get("w_reward", 1.0)),
        )

    def selection_config(self, pool_size: int) -> SelectionConfig:
        k = self.k if self.k is not None else pool_size
        return SelectionConfig(
            k=k,
            seed=self.seed,
            strategy=self.strategy,
            gap_metric=self.gap_metric,
            mc_iterations=self.mc_iterations,
            greedy_batch=self.greedy_batch,
            alpha=self.alpha,
            stage1_k=self.stage1_k,
        )

    def client_config(self, url: str) -> ClientConfig:
        if self.stub or not url:
            return ClientConfig(mode="stub")
        return ClientConfig(
            mode="remote",
            endpoint=url,
            timeout_ms=self.timeout_ms,
            max_retries=self.max_retries,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "tau": self.tau,
            "theta": self.theta,
            "flatten": self.flatten,
            "seed": self.seed,
            "k": self.k,
            "strategy": self.strategy,
            "gap_metric": self.gap_metric,
            "mc_iterations": self.mc_iterations,
            "greedy_batch": self.greedy_batch,
            "stage1_k": self.stage1_k,
            "stub": self.stub,
            "classifier_url": self.classifier_url,
            "judge_url": self.judge_url,
            "embedder_url": self.embedder_url,
            "timeout_ms": self.timeout_ms,
            "max_retries": self.max_retries,
            "banned_patterns": self.banned_patterns,
            "reward": dict(self.reward),
            "composite": dict(self.composite),
        }


_ENV_KEYS = {
    ENV_CLASSIFIER_URL: "classifier_url",
    ENV_JUDGE_URL: "judge_url",
    ENV_EMBEDDER_URL: "embedder_url",
}

_INT_KEYS = {"theta", "seed", "k", "mc_iterations", "greedy_batch", "stage1_k",
             "timeout_ms", "max_retries"}
_FLOAT_KEYS = {"alpha", "tau"}


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        return None
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key == "stub":
        return bool(value)
    return value


def resolve_config(
    flags: dict[str, Any], config_path: str | None = None
) -> tuple[RunConfig, dict[str, Any]]:
    """Merge env < config file < flags; returns the config and the echo.

    ``flags`` maps config field names to values; None means the flag was not
    given and does not override lower layers.
    """
    env_layer = {
        field_name: os.environ[env_key]
        for env_key, field_name in _ENV_KEYS.items()
        if os.environ.get(env_key)
    }
    file_layer: dict[str, Any] = {}
    if config_path:
        try:
            file_layer = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IOFailure(f"cannot read config {config_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise SchemaViolation([(0, f"config is not valid JSON: {exc.msg}")]) from exc
        if not isinstance(file_layer, dict):
            raise SchemaViolation([(0, "config file must hold a JSON object")])
    flag_layer = {key: value for key, value in flags.items() if value is not None}

    cfg = RunConfig()
    known = set(cfg.to_dict())
    for layer in (env_layer, file_layer, flag_layer):
        for key, value in layer.items():
            if key not in known:
                raise SchemaViolation([(0, f"unknown config key '{key}'")])
            setattr(cfg, key, _coerce(key, value))
    echo = {
        "env": env_layer,
        "config_file": file_layer,
        "flags": flag_layer,
        "resolved": cfg.to_dict(),
    }
    return cfg, echo
