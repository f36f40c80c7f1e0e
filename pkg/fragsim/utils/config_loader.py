"""
설정 로더 (Configuration loader)
================================
config/config.yaml (애플리케이션 기본값) + config/.env (환경변수) 를 읽는다.
파일이 없으면 내장 기본값(APP_DEFAULTS)으로 동작한다.

사용법:
    from fragsim.utils.config_loader import ConfigLoader
    cfg = ConfigLoader().load()
    ConfigLoader().get("router.reroute_delay_ms")
"""

import copy
import os
from pathlib import Path
from typing import Any, Dict

import yaml
from dotenv import load_dotenv

from fragsim.utils.logger import logger

# config.yaml 과 같은 구조. 파일 값이 우선한다.
APP_DEFAULTS: Dict[str, Any] = {
    "logging": {"level": "INFO", "file": "logs/fragsim.log"},
    "payload": {
        "record_bytes": 1000,
        "envelope_bytes": 128,
        "ack_bytes": 64,
        "gossip_bytes": 128,
        "gossip_interval_ms": 1000,
    },
    "router": {"reroute_delay_ms": 30000, "jitter_ms": None},
    "topology": {"intra_region_latency_ms": 10.0, "intra_region_bw_mbps": 1000.0},
    "workload": {"timeout_factor": 5.0, "min_timeout_ms": 1000.0},
    "metrics": {"bucket_ms": 1000, "unresponsive_threshold_ms": 5000},
    "engines": {
        "cassandra": {"coordinator_ms": 60.0, "replica_ms": 25.0, "ring_delay_ms": 30000.0,
                      "stream_chunk_bytes": 65536, "num_tokens": 32},
        "mongodb": {"primary_ms": 2.0, "secondary_ms": 2.0},
        "redis": {"node_ms": 0.3, "accept_ms": 2000.0, "slot_control_rtts": 4,
                  "migrate_batch_keys": 10},
        "mysql": {"sql_ms": 1.5, "data_ms": 1.0},
    },
}

ENV_KEYS = ("FRAGSIM_OUTDIR", "FRAGSIM_LOG_LEVEL")


def _deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigLoader:
    """Load and manage configuration from YAML and environment variables"""

    def __init__(self, config_path: str = "config/config.yaml", env_path: str = "config/.env"):
        self.config_path = Path(config_path)
        self.env_path = Path(env_path)
        self.config: Dict[str, Any] = copy.deepcopy(APP_DEFAULTS)
        self.env_vars: Dict[str, str] = {}

    def load(self) -> Dict[str, Any]:
        """Load configuration from YAML and .env files"""
        load_dotenv(self.env_path)

        if self.config_path.exists():
            with open(self.config_path, "r", encoding="utf-8") as f:
                self.config = _deep_merge(APP_DEFAULTS, yaml.safe_load(f) or {})
        else:
            logger.debug(f"설정 파일 없음, 기본값 사용: {self.config_path}")

        self.env_vars = {k: os.getenv(k, "") for k in ENV_KEYS}
        return self.config

    def get(self, key: str, default: Any = None) -> Any:
        """Get configuration value by dot notation key (e.g., 'router.reroute_delay_ms')"""
        value: Any = self.config
        for k in key.split("."):
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default
        return value

    def get_env(self, key: str, default: str = "") -> str:
        """Get environment variable"""
        return self.env_vars.get(key) or default
