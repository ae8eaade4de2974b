# -*- coding: utf-8 -*-
"""
测试场景解析、命令注册表与场景运行器的输出
"""

import json
from pathlib import Path

import pytest

from overtake_lq.errors import ScenarioError
from pipelines import get_command, list_commands
from scenario_runner import ScenarioRunner
from utils.scenario_loader import ControlRef, parse_scenario

SCENARIOS = Path(__file__).parent / "scenarios"

UNSTABLE_PAIR = {
    "A": [[1.0, 0.0], [1.0, 2.0]],
    "B": [[1.0], [-1.0]],
    "Q": [[1.0, 0.0], [0.0, 1.0]],
    "R": [[1.0]],
}


def _write(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, ensure_ascii=False), encoding="utf-8")
    return path


def _runner(tmp_path, **overrides):
    return ScenarioRunner(overrides={"out": str(tmp_path / "out"), **overrides})


def test_registry():
    names = list_commands()
    for name in ("validate", "decompose", "synthesize", "compare", "certify", "refute",
                 "cesaro-sweep", "abel-sweep", "abel", "kernels-dump"):
        assert name in names
    assert get_command("abel").name == get_command("abel-sweep").name
    with pytest.raises(ValueError):
        get_command("simulate")


def test_parse_reports_syntax_position():
    with pytest.raises(ScenarioError) as info:
        parse_scenario('{\n  "problem": {\n    "A": [[1.0]],,\n  }\n}')
    assert info.value.line == 3


def test_parse_reports_field_path():
    with pytest.raises(ScenarioError) as info:
        parse_scenario(json.dumps({"name": "x"}))
    assert info.value.field_path == "problem"

    bad_q = {"problem": {**UNSTABLE_PAIR, "q": {"closed_form": {"atoms": [{"coeff": [1.0]}]}}}}
    with pytest.raises(ScenarioError) as info:
        parse_scenario(json.dumps(bad_q))
    assert info.value.field_path == "problem.q"

    with pytest.raises(ScenarioError) as info:
        parse_scenario(json.dumps({"problem": UNSTABLE_PAIR, "pipeline": ["simulate"]}),
                       known_commands=list_commands())
    assert info.value.field_path == "pipeline[0].command"


def test_parse_controls_and_references():
    data = {
        "problem": UNSTABLE_PAIR,
        "initial": {"t": 0.0, "x": [1.0, 0.0]},
        "controls": {
            "pulse": {"closed_form": {"atoms": [{"coeff": [1.0], "window": [0.0, 1.0]}]}},
            "shifted": {"ref": "synthesized", "scale": 2.0},
        },
        "pipeline": [{"command": "compare", "params": {"controls": ["pulse", "shifted"]}}],
    }
    scenario = parse_scenario(json.dumps(data), known_commands=list_commands())
    assert scenario.problem.n == 2 and scenario.problem.m == 1
    assert isinstance(scenario.controls["shifted"], ControlRef)
    assert scenario.controls["pulse"](0.5)[0] == 1.0
    assert scenario.control_set.is_full
    assert len(scenario.digest) == 64

    data["pipeline"][0]["params"]["controls"] = ["missing"]
    with pytest.raises(ScenarioError):
        parse_scenario(json.dumps(data))


def test_invalid_scenario_exit_code(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"problem": ', encoding="utf-8")
    status, manifest = _runner(tmp_path).run(path)
    assert status == 1
    assert manifest == {}
    assert not (tmp_path / "out").exists()


def test_empty_pipeline_writes_nothing(tmp_path):
    path = _write(tmp_path, {"schema": "overtake-lq/1", "problem": UNSTABLE_PAIR, "pipeline": []})
    status, manifest = _runner(tmp_path).run(path)
    assert status == 0
    assert manifest == {"files": []}
    assert not (tmp_path / "out").exists()


def test_run_writes_report_and_manifest(tmp_path):
    data = {
        "schema": "overtake-lq/1",
        "name": "unstable_pair_small",
        "problem": UNSTABLE_PAIR,
        "initial": {"t": 0.0, "x": [1.0, 0.0]},
        "pipeline": [
            {"command": "validate"},
            {"command": "cesaro-sweep", "params": {"horizons": [1, 2, 3]}},
            # 该问题无法镇定，标准形约化失败只影响这一条命令
            {"command": "certify"},
        ],
    }
    runner = _runner(tmp_path)
    status, manifest = runner.run(_write(tmp_path, data))
    assert status == 0

    out = tmp_path / "out"
    names = [f["path"] for f in manifest["files"]]
    assert "02_cesaro_sweep.csv" in names
    assert "report.json" in names
    assert (out / "manifest.json").exists()
    for entry in manifest["files"]:
        assert len(entry["sha256"]) == 64
        assert entry["bytes"] == (out / entry["path"]).stat().st_size

    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["scenario"] == "unstable_pair_small"
    commands = report["commands"]
    assert [c["command"] for c in commands] == ["validate", "cesaro-sweep", "certify"]
    assert commands[0]["verdict"] == "uncontrollable"
    assert commands[1]["verdict"] == "divergent"
    assert commands[2]["success"] is False
    assert commands[2]["error_type"] == "StabilizerRequiredError"

    header = (out / "02_cesaro_sweep.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "T,J_T,cesaro_mean"
    assert [r.success for r in runner.results] == [True, True, False]


def test_parallel_workers_give_same_verdicts(tmp_path):
    data = {
        "problem": UNSTABLE_PAIR,
        "initial": {"x": [1.0, 0.0]},
        "pipeline": [{"command": "validate"},
                     {"command": "cesaro-sweep", "params": {"horizons": [1, 2]}}],
    }
    path = _write(tmp_path, data)
    serial = _runner(tmp_path / "a")
    parallel = _runner(tmp_path / "b", workers=2)
    assert serial.run(path)[0] == 0
    assert parallel.run(path)[0] == 0
    assert [r.verdict for r in serial.results] == [r.verdict for r in parallel.results]


def test_random_count_from_config(tmp_path):
    """config.yaml 的 random.count 决定随机比较控制的条数，命令 params 可覆盖"""
    config = tmp_path / "config.yaml"
    config.write_text("random:\n  seed: 3\n  count: 2\n", encoding="utf-8")
    data = {
        "problem": {"A": [[-1.0]], "B": [[1.0]], "Q": [[1.0]], "R": [[1.0]]},
        "initial": {"x": [1.0]},
        "pipeline": [{"command": "synthesize"},
                     {"command": "compare", "params": {"horizons": [2, 4, 8, 16]}},
                     {"command": "compare", "params": {"horizons": [2, 4, 8, 16], "random": 1}}],
    }
    runner = ScenarioRunner(str(config), overrides={"out": str(tmp_path / "out")})
    status, _ = runner.run(_write(tmp_path, data))
    assert status == 0
    from_config, from_params = runner.results[1], runner.results[2]
    assert from_config.success and from_params.success
    assert sorted(from_config.payload["verdicts"]) == ["random_1", "random_2"]
    assert list(from_params.payload["verdicts"]) == ["random_1"]


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_scenarios_run(tmp_path, path):
    runner = _runner(tmp_path)
    status, manifest = runner.run(path)
    assert status == 0
    names = [f["path"] for f in manifest["files"]]
    assert "report.json" in names
    assert len(runner.results) == len(json.loads(path.read_text(encoding="utf-8"))["pipeline"])


def test_projected_overtaking_scenario(tmp_path):
    """ℍ₀ 上的 ū 超越 0、ū+1_[0,1) 与 1.1ū，时域到 T = 64"""
    runner = _runner(tmp_path)
    status, _ = runner.run(SCENARIOS / "section_3.json")
    assert status == 0
    assert all(r.success for r in runner.results)
    compare = runner.results[-1]
    assert compare.verdict == "overtaking-evidence"
    traces = compare.payload["traces"]
    assert [t["label"] for t in traces] == ["zero", "bump", "scaled"]
    for trace in traces:
        assert trace["verdict"] == "overtaking-evidence"
        assert max(trace["horizons"]) == 64.0
        assert trace["limsup_estimate"] <= 1e-6


def test_cesaro_abel_scenario(tmp_path):
    runner = _runner(tmp_path)
    status, _ = runner.run(SCENARIOS / "example_2_7.json")
    assert status == 0
    assert [r.verdict for r in runner.results] == ["uncontrollable", "divergent",
                                                   "divergent", "convergent"]


def test_lower_bound_certificate_scenario(tmp_path):
    runner = _runner(tmp_path)
    status, _ = runner.run(SCENARIOS / "example_6_1.json")
    assert status == 0
    assert all(r.success for r in runner.results)
    certify = runner.results[1]
    assert certify.verdict == "certified"


def test_rerun_is_deterministic(tmp_path):
    """同一场景重跑，report.json 只有 generated_at 不同，CSV 逐字节相同"""
    path = SCENARIOS / "drift_refutation.json"
    out = tmp_path / "out"
    reports, digests = [], []
    for _ in range(2):
        status, manifest = _runner(tmp_path).run(path)
        assert status == 0
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        report.pop("generated_at")
        reports.append(report)
        digests.append({f["path"]: f["sha256"] for f in manifest["files"]
                        if f["path"].endswith(".csv")})
    assert reports[0] == reports[1]
    assert digests[0] == digests[1]
    assert digests[0]
