"""
DB 클러스터 행동 모델 (Cassandra / MongoDB / Redis Cluster / MySQL Cluster)

사용법:
    from fragsim.dbmodels import create_model
    model = create_model("cassandra", topology, {"rf": 3, "cl": 1})
    model.bind(network)
    model.place_records(10_000)
"""

from typing import Optional

from fragsim.dbmodels.base import (
    Call, ChurnPlan, DbClusterModel, DbModelError, InsufficientNodesError, MembershipError,
    OperationPlan, OwnersUnreachableError, PayloadSizes, Placement, Transfer,
    UnsupportedOperationError, key_name,
)
from fragsim.dbmodels.cassandra import CassandraModel
from fragsim.dbmodels.mongo import MongoModel
from fragsim.dbmodels.mysql import MySqlModel
from fragsim.dbmodels.redis_cluster import SLOT_COUNT, RedisModel, key_slot
from fragsim.topology import ClusterTopology

ENGINES = ("cassandra", "mongodb", "redis", "mysql")

# 엔진 설정 섹션에서 허용하는 키
ENGINE_KEYS = ("name", "rf", "cl", "read_preference", "replicas_per_shard", "protected_nodes", "redis_allocation")


def _role(topology: ClusterTopology, role: str, members: list[str], engine: str) -> str:
    nodes = [n for n in topology.nodes_with(role) if n in members]
    if not nodes:
        raise MembershipError(f"{engine}: no data node carries the '{role}' role")
    return nodes[0]


def create_model(engine: str, topology: ClusterTopology, engine_cfg: Optional[dict] = None,
                 payload: Optional[PayloadSizes] = None, profiles: Optional[dict] = None,
                 members: Optional[list[str]] = None) -> DbClusterModel:
    """Build the engine model over the topology's data nodes, taking roles from node flags."""
    if engine not in ENGINES:
        raise DbModelError(f"unknown engine: {engine} (expected one of {', '.join(ENGINES)})")
    cfg = engine_cfg or {}
    profile = dict((profiles or {}).get(engine, {}))
    members = sorted(members if members is not None else topology.data_nodes())
    protected = cfg.get("protected_nodes", ())

    if engine == "cassandra":
        return CassandraModel(members, _role(topology, "seed", members, engine),
                              replication_factor=int(cfg.get("rf", 3)),
                              consistency_level=int(cfg.get("cl", 1)),
                              payload=payload, profile=profile, protected=protected)
    if engine == "mongodb":
        return MongoModel(members, _role(topology, "primary", members, engine),
                          non_voting=[n for n in topology.nodes_with("non_voting") if n in members],
                          hidden=[n for n in topology.nodes_with("hidden") if n in members],
                          read_preference=cfg.get("read_preference", "nearest_secondary"),
                          payload=payload, profile=profile, protected=protected)
    if engine == "redis":
        if cfg.get("redis_allocation"):
            profile["allocation"] = cfg["redis_allocation"]
        return RedisModel(members, payload=payload, profile=profile, protected=protected)
    mgmt = [n for n in topology.nodes_with("mgmt") if n in members]
    return MySqlModel(members, _role(topology, "sql", members, engine), mgmt[0] if mgmt else None,
                      replicas_per_shard=int(cfg.get("replicas_per_shard", 2)),
                      payload=payload, profile=profile, protected=protected)


__all__ = [
    "ENGINES", "ENGINE_KEYS", "SLOT_COUNT", "Call", "CassandraModel", "ChurnPlan", "DbClusterModel",
    "DbModelError", "InsufficientNodesError", "MembershipError", "MongoModel", "MySqlModel",
    "OperationPlan", "OwnersUnreachableError", "PayloadSizes", "Placement", "RedisModel", "Transfer",
    "UnsupportedOperationError", "create_model", "key_name", "key_slot",
]
