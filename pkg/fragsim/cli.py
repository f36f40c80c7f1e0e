"""
fragsim CLI
===========
실행 문서(JSON/YAML) 검증 → 시나리오 실행 → 결과 내보내기.

서브커맨드:
    validate       실행 문서 스키마/의미 검증 (줄 번호 포함 진단)
    run            시나리오 실행, run 마다 한 줄 요약 출력, 결과 파일 저장
    dump-presets   내장 기준 행렬 + YCSB 프리셋을 유효한 실행 문서로 출력
    replay-trace   덤프된 이벤트 트레이스의 해시를 다시 계산해 summary.json 과 비교

종료 코드: 0 성공, 1 검증/파싱 오류, 2 런타임 오류

사용법:
    python main.py validate config/sample_run.json
    python main.py run config/sample_run.json --set scenario.lsf=0.6
    python main.py run --scenario lsf_sweep --engine cassandra --workloads A..F --seed 7
    python main.py run --preset reference --outdir results/reference
    python main.py dump-presets > presets.json
    python main.py replay-trace results/traces/lsf_sweep/cassandra/A/lsf-1/trace.ndjson \\
        --summary results/lsf_sweep/cassandra/A/lsf-1/summary.json
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

import yaml

from fragsim.dbmodels import ENGINES, DbModelError, create_model
from fragsim.metrics import EXPORT_FORMATS, MetricsError, export, summaries_frame
from fragsim.result_store import ResultStore, ResultStoreError
from fragsim.router import RouteError
from fragsim.scenarios import (
    DEFAULT_LSF_SET, SCENARIO_KINDS, ScenarioError, ScenarioSpec, SimConfig, base_topology,
    check_removal_order, run_scenario,
)
from fragsim.simkernel import KernelError, trace_hash_of_file
from fragsim.topology import QosSchedule, TopologyError, builtin_reference_matrix, reference_nodes
from fragsim.utils.config_loader import ConfigLoader
from fragsim.utils.logger import logger, setup_logger
from fragsim.workload import PRESET_DESCRIPTIONS, PRESET_NAMES, WorkloadError, preset

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2

TOPOLOGY_PRESETS = ("reference", "custom")
# 내장 8 리전 행렬의 다른 이름
PRESET_ALIASES = {"paper-table3": "reference"}

_NUM = (int, float)

# 섹션 → 키 → 허용 타입. "*" 는 내용 검사를 의미 검증 단계에 맡긴다.
SCHEMA: dict[str, Any] = {
    "seed": int,
    "output_dir": str,
    "parallelism": int,
    "trace": {"enabled": bool, "dir": (str, type(None))},
    "topology": {
        "preset": str,
        "custom": (dict, type(None)),
        "intra_region_latency_ms": _NUM,
        "intra_region_bw_mbps": _NUM,
        "inverse_bandwidth": bool,
        "epochs": (list, type(None)),
    },
    "router": {"reroute_delay_ms": _NUM, "jitter_ms": (list, type(None))},
    "engine": {
        "name": str, "rf": int, "cl": int, "read_preference": (str, type(None)), "replicas_per_shard": int,
        "protected_nodes": list, "redis_allocation": (str, type(None)),
    },
    "workload": {
        "names": list, "record_count": int, "operation_count": (int, type(None)),
        "key_distribution": (str, type(None)), "zipfian_theta": _NUM, "max_scan_len": int,
        "threads": int, "batches": int, "timeout_factor": _NUM, "min_timeout_ms": _NUM,
    },
    "scenario": {
        "kind": str, "lsf_set": list, "lsf": _NUM, "removal_order": (list, type(None)),
        "step_interval_ms": _NUM, "links_total": int, "links_to_remove": int, "dwell_ms": _NUM,
        "connectivity_guard": bool, "redis_online": bool,
    },
    "payload": {
        "record_bytes": int, "envelope_bytes": int, "ack_bytes": int, "gossip_bytes": int,
        "gossip_interval_ms": _NUM,
    },
    "metrics": {"bucket_ms": int, "unresponsive_threshold_ms": int, "formats": list},
    "presets": "*",
}


def default_run_document() -> dict:
    """The run document every file/override is merged onto."""
    return {
        "seed": 0,
        "output_dir": "results",
        "parallelism": 1,
        "trace": {"enabled": False, "dir": None},
        "topology": {"preset": "reference", "custom": None, "intra_region_latency_ms": 10.0,
                     "intra_region_bw_mbps": 1000.0, "inverse_bandwidth": False, "epochs": None},
        "router": {"reroute_delay_ms": 30000.0, "jitter_ms": None},
        "engine": {"name": "cassandra", "rf": 3, "cl": 1, "read_preference": None,
                   "replicas_per_shard": 2, "protected_nodes": [], "redis_allocation": None},
        "workload": {"names": ["A"], "record_count": 10000, "operation_count": None,
                     "key_distribution": None, "zipfian_theta": 0.99, "max_scan_len": 100,
                     "threads": 4, "batches": 10, "timeout_factor": 5.0, "min_timeout_ms": 1000.0},
        "scenario": {"kind": "lsf_sweep", "lsf_set": list(DEFAULT_LSF_SET), "lsf": 1.0, "removal_order": None,
                     "step_interval_ms": 120000.0, "links_total": 64, "links_to_remove": 50,
                     "dwell_ms": 60000.0, "connectivity_guard": True, "redis_online": False},
        "payload": {"record_bytes": 1000, "envelope_bytes": 128, "ack_bytes": 64, "gossip_bytes": 128,
                    "gossip_interval_ms": 1000},
        "metrics": {"bucket_ms": 1000, "unresponsive_threshold_ms": 5000, "formats": list(EXPORT_FORMATS)},
    }


# ============================================================
# 진단 / 오류
# ============================================================

@dataclass
class Diagnostic:
    path: str
    message: str
    line: Optional[int] = None

    def __str__(self) -> str:
        where = f"line {self.line}" if self.line else "<override>"
        return f"{where}: {self.path}: {self.message}" if self.path else f"{where}: {self.message}"


class ConfigError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


# ============================================================
# 파싱 (PyYAML 노드 트리에서 줄 번호 수집)
# ============================================================

def _collect_lines(node, prefix: str, lines: dict[str, int]) -> None:
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            lines[path] = key_node.start_mark.line + 1
            _collect_lines(value_node, path, lines)


def parse_document(text: str, source: str = "<config>") -> tuple[dict, dict[str, int]]:
    """Parse a JSON/YAML run document; returns (document, dotted path → 1-based line)."""
    try:
        root = yaml.compose(text)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError([Diagnostic("", f"{source}: parse error: {getattr(e, 'problem', e)}", line)]) from e
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError([Diagnostic("", f"{source}: top level must be a mapping", 1)])
    lines: dict[str, int] = {}
    _collect_lines(root, "", lines)
    return doc, lines


def _type_ok(value: Any, expected) -> bool:
    types = expected if isinstance(expected, tuple) else (expected,)
    if isinstance(value, bool) and bool not in types:
        return False
    return isinstance(value, types)


def _type_name(expected) -> str:
    types = expected if isinstance(expected, tuple) else (expected,)
    return " | ".join("null" if t is type(None) else t.__name__ for t in types)


def check_schema(doc: dict, lines: dict[str, int]) -> list[Diagnostic]:
    diags = []
    for key, value in doc.items():
        expected = SCHEMA.get(key)
        if expected is None:
            diags.append(Diagnostic(key, "unknown key", lines.get(key)))
        elif expected == "*":
            continue
        elif isinstance(expected, dict):
            if not isinstance(value, dict):
                diags.append(Diagnostic(key, "must be a mapping", lines.get(key)))
                continue
            for sub, sub_value in value.items():
                path = f"{key}.{sub}"
                if sub not in expected:
                    diags.append(Diagnostic(path, "unknown key", lines.get(path)))
                elif not _type_ok(sub_value, expected[sub]):
                    diags.append(Diagnostic(path, f"expected {_type_name(expected[sub])}, "
                                                  f"got {type(sub_value).__name__}", lines.get(path)))
        elif not _type_ok(value, expected):
            diags.append(Diagnostic(key, f"expected {_type_name(expected)}, got {type(value).__name__}",
                                    lines.get(key)))
    return diags


def parse_override(text: str) -> tuple[str, Any]:
    """`a.b=value` → ("a.b", value) with value read as a YAML scalar/list."""
    if "=" not in text:
        raise ConfigError([Diagnostic(text, "override must look like key.path=value")])
    path, raw = text.split("=", 1)
    path = path.strip()
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as e:
        raise ConfigError([Diagnostic(path, f"cannot parse override value: {e}")]) from e
    return path, value


def apply_override(doc: dict, path: str, value: Any) -> None:
    parts = path.split(".")
    schema: Any = SCHEMA
    for p in parts:
        if not isinstance(schema, dict) or p not in schema:
            raise ConfigError([Diagnostic(path, "override of a key that is not in the schema")])
        schema = schema[p]
    target = doc
    for p in parts[:-1]:
        target = target.setdefault(p, {})
    target[parts[-1]] = value


def _merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def parse_workloads(text: str) -> list[str]:
    """"A..F" / "A,C,E" / "B" → preset names."""
    names: list[str] = []
    for part in (p.strip().upper() for p in text.split(",") if p.strip()):
        if ".." in part:
            lo, hi = part.split("..", 1)
            if lo not in PRESET_NAMES or hi not in PRESET_NAMES:
                raise ConfigError([Diagnostic("workload.names", f"unknown workload range: {part}")])
            i, j = PRESET_NAMES.index(lo), PRESET_NAMES.index(hi)
            names.extend(PRESET_NAMES[i:j + 1])
        else:
            names.append(part)
    return names


# ============================================================
# RunConfig
# ============================================================

@dataclass
class RunConfig:
    doc: dict
    lines: dict = field(default_factory=dict)
    explicit: set = field(default_factory=set)

    def section(self, name: str) -> dict:
        return self.doc.get(name) or {}

    @property
    def engine(self) -> str:
        return self.section("engine")["name"]

    def workload_overrides(self) -> dict:
        w = self.section("workload")
        keys = ("record_count", "operation_count", "key_distribution", "zipfian_theta", "max_scan_len",
                "threads", "batches")
        return {k: w[k] for k in keys if w.get(k) is not None}

    def scenario_spec(self) -> ScenarioSpec:
        s = self.section("scenario")
        order = s.get("removal_order")
        return ScenarioSpec(
            kind=s["kind"],
            engine=self.engine,
            workloads=tuple(str(w).upper() for w in self.section("workload")["names"]),
            lsf_set=tuple(float(x) for x in s["lsf_set"]),
            lsf=float(s["lsf"]),
            removal_order=tuple(order) if order is not None else None,
            step_interval_ms=float(s["step_interval_ms"]),
            links_total=int(s["links_total"]),
            links_to_remove=int(s["links_to_remove"]),
            dwell_ms=float(s["dwell_ms"]),
            connectivity_guard=bool(s["connectivity_guard"]),
            redis_online=bool(s["redis_online"]),
            rng_seed=int(self.doc["seed"]),
            parallelism=int(self.doc["parallelism"]),
            workload_overrides=self.workload_overrides(),
        )

    def engine_cfg(self) -> dict:
        return {k: v for k, v in self.section("engine").items() if k != "name" and v is not None}

    def sim_config(self, app_cfg: dict, outdir: Optional[str] = None) -> SimConfig:
        topo = dict(self.section("topology"))
        if topo.get("preset") != "custom":
            topo["custom"] = None
        run_doc = {**self.doc, "topology": topo, "engine": self.engine_cfg()}
        sim = SimConfig.from_app_config(app_cfg, run_doc)
        trace = self.section("trace")
        if trace.get("enabled") and not trace.get("dir") and outdir:
            sim = replace(sim, trace_dir=str(Path(outdir) / "traces"))
        return sim

    def line(self, path: str) -> Optional[int]:
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path.rpartition(".")[0]
        return None


def build_config(path: Optional[str] = None, overrides: Optional[list[str]] = None) -> RunConfig:
    """Read, merge onto defaults and schema-check a run document plus `--set` overrides."""
    doc, lines = {}, {}
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError([Diagnostic("", f"cannot read {path}: {e}")]) from e
        doc, lines = parse_document(text, path)
    diags = check_schema(doc, lines)
    if diags:
        raise ConfigError(diags)
    merged = _merge(default_run_document(), doc)
    applied = []
    for item in overrides or []:
        key, value = parse_override(item)
        apply_override(merged, key, value)
        applied.append(key)
        lines.pop(key, None)
    diags = check_schema(merged, lines)
    if diags:
        raise ConfigError(diags)
    topo = merged["topology"]
    topo["preset"] = PRESET_ALIASES.get(topo["preset"], topo["preset"])
    explicit = set(doc) | {key.split(".")[0] for key in applied}
    return RunConfig(merged, lines, explicit)


def semantic_check(cfg: RunConfig, app_cfg: Optional[dict] = None) -> list[Diagnostic]:
    """Cross-reference checks that need the domain objects (engines, topology, workloads)."""
    if app_cfg is None:
        app_cfg = ConfigLoader().load()
    diags: list[Diagnostic] = []

    def add(path: str, message: str) -> None:
        diags.append(Diagnostic(path, message, cfg.line(path)))

    engine = cfg.engine
    if engine not in ENGINES:
        add("engine.name", f"unknown engine '{engine}' (expected one of {', '.join(ENGINES)})")
    kind = cfg.section("scenario").get("kind")
    if kind not in SCENARIO_KINDS:
        add("scenario.kind", f"unknown scenario kind '{kind}' (expected one of {', '.join(SCENARIO_KINDS)})")
    topo = cfg.section("topology")
    if topo.get("preset") not in TOPOLOGY_PRESETS:
        add("topology.preset", f"unknown topology preset '{topo.get('preset')}'")
    if topo.get("preset") == "custom" and not topo.get("custom"):
        add("topology.custom", "custom topology preset needs a topology document")
    if cfg.doc["parallelism"] < 1:
        add("parallelism", "must be ≥ 1")
    formats = set(cfg.section("metrics").get("formats", []))
    if formats - set(EXPORT_FORMATS):
        add("metrics.formats", f"unknown formats {sorted(formats - set(EXPORT_FORMATS))}")
    jitter = cfg.section("router").get("jitter_ms")
    if jitter is not None and (len(jitter) != 2 or jitter[0] > jitter[1] or jitter[0] < 0):
        add("router.jitter_ms", "must be [low, high] with 0 ≤ low ≤ high")
    for name in cfg.section("workload").get("names", []):
        try:
            preset(str(name), **cfg.workload_overrides())
        except (WorkloadError, TypeError) as e:
            add("workload.names", str(e))
    if cfg.section("topology").get("epochs"):
        try:
            QosSchedule.from_list(cfg.section("topology")["epochs"])
        except (TopologyError, KeyError, TypeError, ValueError) as e:
            add("topology.epochs", f"invalid epoch list: {e}")
    if diags:
        return diags

    try:
        spec = cfg.scenario_spec()
    except ScenarioError as e:
        add("scenario", str(e))
        return diags
    sim = cfg.sim_config(app_cfg)
    try:
        topology = base_topology(sim)
    except (TopologyError, KeyError, TypeError, ValueError) as e:
        add("topology.custom", f"invalid topology: {e}")
        return diags
    if len(topology.nodes_with("client")) != 1:
        add("topology.custom", "exactly one node must carry the client role")
        return diags

    data = set(topology.data_nodes())
    for node in cfg.section("engine").get("protected_nodes", []):
        if node not in data:
            add("engine.protected_nodes", f"unknown data node '{node}'")
    try:
        create_model(engine, topology, cfg.engine_cfg(), sim.payload, sim.profiles)
    except DbModelError as e:
        add("engine", str(e))
    if spec.kind == "resize":
        for problem in check_removal_order(spec, topology, cfg.engine_cfg()):
            add("scenario.removal_order", problem)
    if spec.kind == "link_churn":
        nodes = sum(1 for n in reference_nodes() if n.has("data"))
        if spec.links_total < nodes - 1:
            add("scenario.links_total", f"{spec.links_total} links cannot connect {nodes} nodes")
        elif spec.connectivity_guard and spec.links_to_remove > spec.links_total - (nodes - 1):
            add("scenario.links_to_remove",
                f"removing {spec.links_to_remove} of {spec.links_total} links would disconnect the mesh")
    return diags


def load_run_config(path: Optional[str] = None, overrides: Optional[list[str]] = None,
                    app_cfg: Optional[dict] = None) -> RunConfig:
    cfg = build_config(path, overrides)
    diags = semantic_check(cfg, app_cfg)
    if diags:
        raise ConfigError(diags)
    return cfg


def _print_diagnostics(err: ConfigError) -> None:
    for d in err.diagnostics:
        print(f"❌ {d}", file=sys.stderr)


# ============================================================
# 서브커맨드
# ============================================================

def cmd_validate(args) -> int:
    app_cfg = ConfigLoader(args.app_config).load()
    try:
        load_run_config(args.config, args.set, app_cfg)
    except ConfigError as e:
        _print_diagnostics(e)
        return EXIT_INVALID
    print(f"✅ {args.config}: valid")
    return EXIT_OK


def _flag_overrides(args) -> list[str]:
    overrides = []
    # 프리셋 기본값이 먼저, --set 과 개별 플래그가 그 위에
    if args.preset:
        overrides.append(f"topology.preset={args.preset}")
        if PRESET_ALIASES.get(args.preset, args.preset) == "reference":
            overrides += ["workload.record_count=10000", f"scenario.lsf_set={list(DEFAULT_LSF_SET)}"]
    overrides += args.set or []
    if args.scenario:
        overrides.append(f"scenario.kind={args.scenario}")
    if args.engine:
        overrides.append(f"engine.name={args.engine}")
    if args.workloads:
        overrides.append(f"workload.names=[{', '.join(parse_workloads(args.workloads))}]")
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.parallelism is not None:
        overrides.append(f"parallelism={args.parallelism}")
    return overrides


def resolve_outdir(args, cfg: RunConfig, loader: ConfigLoader) -> str:
    if args.outdir:
        return args.outdir
    if "output_dir" in cfg.explicit:
        return cfg.doc["output_dir"]
    return loader.get_env("FRAGSIM_OUTDIR") or cfg.doc["output_dir"] or "results"


def cmd_run(args) -> int:
    loader = ConfigLoader(args.app_config)
    app_cfg = loader.load()
    try:
        cfg = load_run_config(args.config, _flag_overrides(args), app_cfg)
    except ConfigError as e:
        _print_diagnostics(e)
        return EXIT_INVALID

    level = args.log_level or loader.get_env("FRAGSIM_LOG_LEVEL") or app_cfg["logging"]["level"]
    setup_logger(app_cfg["logging"].get("file"), level)

    outdir = resolve_outdir(args, cfg, loader)
    spec = cfg.scenario_spec()
    try:
        store = ResultStore(Path(outdir))
        store.create_run({"command": "run", "config": cfg.doc})
    except ResultStoreError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_RUNTIME

    log = logger.bind(engine=spec.engine, scenario=spec.kind)
    log.info(f"run 시작: {spec.kind} / {spec.engine} / workloads {','.join(spec.workloads)} → {outdir}")
    try:
        results = run_scenario(spec, cfg.sim_config(app_cfg, outdir))
        export(results, cfg.section("metrics")["formats"], store=store)
        store.write_frame([], "summaries.csv", summaries_frame(r.summary for r in results))
    except (ScenarioError, DbModelError, KernelError, RouteError, TopologyError, WorkloadError,
            MetricsError, ResultStoreError) as e:
        log.error(f"run 실패: {e}")
        store.update_run_status("failed", error=str(e))
        print(f"❌ run failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        log.exception(f"run 중 예상치 못한 오류: {e}")
        store.update_run_status("failed", error=f"{type(e).__name__}: {e}")
        print(f"❌ run failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    for r in results:
        print(r.summary.one_line())
    store.update_run_status("completed", runs=len(results))
    log.info(f"run 완료: {len(results)} runs")
    return EXIT_OK


def presets_document() -> dict:
    """A valid run document that also carries the built-in matrix and workload presets."""
    doc = default_run_document()
    doc["presets"] = {
        "reference_matrix": builtin_reference_matrix().to_dict(),
        "workloads": {name: {**preset(name).to_dict(), "description": PRESET_DESCRIPTIONS[name]}
                      for name in PRESET_NAMES},
    }
    return doc


def cmd_dump_presets(args) -> int:
    print(json.dumps(presets_document(), ensure_ascii=False, indent=2))
    return EXIT_OK


def cmd_replay_trace(args) -> int:
    try:
        digest, count = trace_hash_of_file(args.trace)
    except OSError as e:
        print(f"❌ cannot read trace: {e}", file=sys.stderr)
        return EXIT_INVALID
    print(f"{digest}  {count} records")
    if not args.summary:
        return EXIT_OK
    try:
        expected = json.loads(Path(args.summary).read_text(encoding="utf-8")).get("trace_hash", "")
    except (OSError, json.JSONDecodeError) as e:
        print(f"❌ cannot read summary: {e}", file=sys.stderr)
        return EXIT_INVALID
    if digest != expected:
        print(f"❌ trace hash mismatch: summary has {expected}", file=sys.stderr)
        return EXIT_RUNTIME
    print("✅ trace matches summary")
    return EXIT_OK


# ============================================================
# 엔트리 포인트
# ============================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fragsim",
        description="Fragmented Hybrid Cloud 이산 사건 에뮬레이터",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
사용 예시:
  python main.py validate config/sample_run.json
  python main.py run config/sample_run.json --set scenario.lsf=0.6
  python main.py run --scenario lsf_sweep --engine cassandra --workloads A..F
  python main.py dump-presets
""",
    )
    parser.add_argument("--app-config", default="config/config.yaml", help="애플리케이션 기본값 YAML")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="실행 문서 검증")
    p.add_argument("config", help="실행 문서 (JSON/YAML)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="점 경로 오버라이드 (반복 가능)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="시나리오 실행")
    p.add_argument("config", nargs="?", help="실행 문서 (없으면 기본값)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="점 경로 오버라이드 (반복 가능)")
    p.add_argument("--scenario", choices=SCENARIO_KINDS, help="시나리오 종류")
    p.add_argument("--engine", choices=ENGINES, help="DB 엔진")
    p.add_argument("--workloads", help="워크로드 목록: A..F, A,C,E")
    p.add_argument("--seed", type=int, help="난수 시드")
    p.add_argument("--preset", choices=(*TOPOLOGY_PRESETS, *PRESET_ALIASES), help="토폴로지 프리셋")
    p.add_argument("--outdir", help="결과 디렉토리 (기본: FRAGSIM_OUTDIR 또는 results)")
    p.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="로그 레벨")
    p.add_argument("--parallelism", type=int, help="LSF sweep 병렬 프로세스 수")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("dump-presets", help="내장 기준 행렬/워크로드 프리셋 출력")
    p.set_defaults(func=cmd_dump_presets)

    p = sub.add_parser("replay-trace", help="트레이스 해시 재계산")
    p.add_argument("trace", help="trace.ndjson 경로")
    p.add_argument("--summary", help="비교할 summary.json")
    p.set_defaults(func=cmd_replay_trace)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        _print_diagnostics(e)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
