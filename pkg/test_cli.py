"""CLI: validate 진단, 오버라이드, dump-presets, run → replay-trace 종단 테스트"""
import json
from pathlib import Path

import pandas as pd
import pytest

from fragsim.cli import (
    EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, ConfigError, build_config, main, parse_override, parse_workloads,
    semantic_check,
)

ROOT = Path(__file__).parent
SAMPLE = str(ROOT / "config" / "sample_run.json")


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture
def app_config(tmp_path):
    return write(tmp_path, "app.yaml", "logging:\n  level: WARNING\n  file: null\n")


# ============================================================
# validate
# ============================================================

def test_validate_sample_document(capsys):
    assert main(["validate", SAMPLE]) == EXIT_OK
    assert "valid" in capsys.readouterr().out


def test_unknown_engine_is_invalid(capsys):
    assert main(["validate", SAMPLE, "--set", "engine.name=oracle"]) == EXIT_INVALID
    assert "engine.name" in capsys.readouterr().err


def test_unknown_override_key_is_invalid(capsys):
    assert main(["validate", SAMPLE, "--set", "scenario.speed=3"]) == EXIT_INVALID
    assert "not in the schema" in capsys.readouterr().err


def test_schema_diagnostics_carry_line_numbers(tmp_path):
    path = write(tmp_path, "bad.yaml", "seed: 1\nengin:\n  name: redis\nparallelism: two\n")
    with pytest.raises(ConfigError) as err:
        build_config(path)
    rendered = [str(d) for d in err.value.diagnostics]
    assert "line 2: engin: unknown key" in rendered
    assert any(r.startswith("line 4: parallelism: expected int") for r in rendered)


def test_protected_node_in_removal_order(tmp_path):
    path = write(tmp_path, "resize.yaml",
                 "engine:\n  name: cassandra\nscenario:\n  kind: resize\n  removal_order: [melbourne]\n")
    diags = semantic_check(build_config(path))
    assert len(diags) == 1
    assert diags[0].line == 5
    assert "melbourne" in str(diags[0]) and "seed" in str(diags[0])


def test_link_churn_counts_checked():
    diags = semantic_check(build_config(None, ["scenario.kind=link_churn", "scenario.links_to_remove=60"]))
    assert [d.path for d in diags] == ["scenario.links_to_remove"]


def test_parse_error_reports_line(tmp_path, capsys):
    path = write(tmp_path, "broken.json", '{\n  "seed": 1,\n  "engine": {\n}\n')
    assert main(["validate", path]) == EXIT_INVALID
    assert "parse error" in capsys.readouterr().err


# ============================================================
# 파싱 헬퍼
# ============================================================

def test_parse_workloads():
    assert parse_workloads("A..F") == ["A", "B", "C", "D", "E", "F"]
    assert parse_workloads("a, c") == ["A", "C"]
    assert parse_workloads("B..D,F") == ["B", "C", "D", "F"]
    with pytest.raises(ConfigError):
        parse_workloads("A..Z")


def test_parse_override_reads_yaml_values():
    assert parse_override("scenario.lsf_set=[0.2, 1.0]") == ("scenario.lsf_set", [0.2, 1.0])
    assert parse_override("trace.enabled=true") == ("trace.enabled", True)
    assert parse_override("engine.name=redis") == ("engine.name", "redis")
    with pytest.raises(ConfigError):
        parse_override("seed")


# ============================================================
# dump-presets
# ============================================================

def test_dump_presets_is_a_valid_document(tmp_path, capsys):
    assert main(["dump-presets"]) == EXIT_OK
    text = capsys.readouterr().out
    doc = json.loads(text)
    matrix = doc["presets"]["reference_matrix"]
    assert "189" in json.dumps(matrix)
    assert doc["presets"]["workloads"]["C"]["proportions"] == {"read": 1.0}
    assert main(["validate", write(tmp_path, "presets.json", text)]) == EXIT_OK


# ============================================================
# run / replay-trace
# ============================================================

def _small_run(tmp_path, app_config, *extra):
    out = tmp_path / "out"
    argv = ["--app-config", app_config, "run", SAMPLE, "--workloads", "C",
            "--set", "workload.record_count=50", "--set", "workload.operation_count=20",
            "--set", "scenario.lsf_set=[1.0]", "--set", "trace.enabled=true", "--outdir", str(out), *extra]
    return main(argv), out


def test_run_writes_results_and_trace_replays(tmp_path, app_config, capsys):
    code, out = _small_run(tmp_path, app_config)
    assert code == EXIT_OK
    assert "lsf_sweep/cassandra/C lsf=1" in capsys.readouterr().out

    run_dir = out / "lsf_sweep" / "cassandra" / "C" / "lsf-1"
    for name in ("summary.json", "timeline.csv", "oplog.csv", "traffic.dot"):
        assert (run_dir / name).exists()
    assert json.loads((out / "meta.json").read_text())["status"] == "completed"
    assert len(pd.read_csv(out / "summaries.csv")) == 1

    trace = str(out / "traces" / "lsf_sweep" / "cassandra" / "C" / "lsf-1" / "trace.ndjson")
    summary = run_dir / "summary.json"
    assert main(["replay-trace", trace, "--summary", str(summary)]) == EXIT_OK

    doc = json.loads(summary.read_text())
    doc["trace_hash"] = "0" * 64
    summary.write_text(json.dumps(doc))
    assert main(["replay-trace", trace, "--summary", str(summary)]) == EXIT_RUNTIME


def test_same_seed_gives_identical_summary(tmp_path, app_config):
    first, out1 = _small_run(tmp_path / "a", app_config)
    second, out2 = _small_run(tmp_path / "b", app_config)
    assert first == second == EXIT_OK
    rel = Path("lsf_sweep") / "cassandra" / "C" / "lsf-1" / "summary.json"
    assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes()


def test_protected_removal_rejected_before_run(tmp_path, app_config):
    code, out = _small_run(tmp_path, app_config, "--scenario", "resize",
                           "--set", "scenario.removal_order=[singapore]", "--set", "engine.protected_nodes=[singapore]")
    assert code == EXIT_INVALID
    assert not out.exists()


def test_unwritable_outdir_is_runtime_error(tmp_path, app_config):
    blocker = tmp_path / "blocker"
    blocker.write_text("x")
    code = main(["--app-config", app_config, "run", SAMPLE, "--outdir", str(blocker / "sub")])
    assert code == EXIT_RUNTIME


def test_replay_missing_trace():
    assert main(["replay-trace", "does/not/exist.ndjson"]) == EXIT_INVALID


def test_unexpected_error_during_run_is_runtime_error(tmp_path, app_config, monkeypatch, capsys):
    def explode(spec, sim):
        raise RuntimeError("boom")

    monkeypatch.setattr("fragsim.cli.run_scenario", explode)
    code, out = _small_run(tmp_path, app_config)
    assert code == EXIT_RUNTIME
    meta = json.loads((out / "meta.json").read_text())
    assert meta["status"] == "failed"
    assert "boom" in capsys.readouterr().err


# ============================================================
# 프리셋 별칭 / 애플리케이션 설정 반영
# ============================================================

def test_paper_table3_preset_alias_runs(tmp_path, app_config):
    out = tmp_path / "out"
    code = main(["--app-config", app_config, "run", "--preset", "paper-table3", "--engine", "redis",
                 "--workloads", "A", "--set", "workload.record_count=50", "--set", "workload.operation_count=20",
                 "--set", "scenario.lsf_set=[1.0]", "--outdir", str(out)])
    assert code == EXIT_OK
    meta = json.loads((out / "meta.json").read_text())
    assert meta["config"]["topology"]["preset"] == "reference"


def test_paper_table3_preset_alias_validates():
    assert main(["validate", SAMPLE, "--set", "topology.preset=paper-table3"]) == EXIT_OK


def test_validate_uses_engine_profiles_from_app_config(tmp_path, capsys):
    bad = write(tmp_path, "bad_app.yaml", "engines:\n  redis:\n    allocation: triangular\n")
    assert main(["--app-config", bad, "validate", SAMPLE, "--set", "engine.name=redis"]) == EXIT_INVALID
    assert "triangular" in capsys.readouterr().err

    good = write(tmp_path, "good_app.yaml", "engines:\n  redis:\n    allocation: even\n")
    assert main(["--app-config", good, "validate", SAMPLE, "--set", "engine.name=redis"]) == EXIT_OK
