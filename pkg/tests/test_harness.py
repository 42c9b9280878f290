import json

import pytest

from orgscada import (
    NetConfig,
    Scenario,
    ScriptStep,
    hop_count_oracle,
    make_lifecycle,
    make_orgs,
    make_benchmark,
    render_table,
    run,
)
from orgscada.errors import ScenarioInvalid
from orgscada.harness import LatencyReport
from orgscada.scada import LatencyRecord


def test_empty_script_empty_report():
    scenario = Scenario(name="empty", orgs=make_orgs(2), script=[])
    result = run(scenario)
    assert result.report.rows == []
    assert result.report.errors == []


def test_scenario_validation():
    with pytest.raises(ScenarioInvalid):
        Scenario(
            name="bad",
            orgs=make_orgs(1),
            script=[ScriptStep(0, "O9", "open", {"service": "O1.PLC1"})],
        ).validate()
    with pytest.raises(ScenarioInvalid):
        Scenario(
            name="bad",
            orgs=make_orgs(1),
            script=[
                ScriptStep(100, "O1", "open", {"service": "O1.PLC1"}),
                ScriptStep(50, "O1", "open", {"service": "O1.PLC2"}),
            ],
        ).validate()
    with pytest.raises(ScenarioInvalid):
        Scenario(
            name="bad", orgs=make_orgs(1), script=[ScriptStep(0, "O1", "dance", {})]
        ).validate()


def test_scenario_doc_round_trip():
    scenario = make_benchmark()
    doc = scenario.to_doc()
    again = Scenario.from_doc(json.loads(json.dumps(doc)))
    assert again.to_doc() == doc


def test_hop_count_oracle_values():
    assert hop_count_oracle("Local") == 0
    assert hop_count_oracle("SharedAlready") == 0
    assert hop_count_oracle("ExtendOverlap") > 0
    assert hop_count_oracle("NewOverlap") > hop_count_oracle("ExtendOverlap")


def test_benchmark_rows_match_oracle():
    scenario = make_benchmark()
    result = run(scenario)
    assert len(result.report.rows) == 48
    d = scenario.net.default_hop_latency_ms
    for row in result.report.rows:
        assert row.t_service_ms == hop_count_oracle(row.path_class) * d


def test_determinism_bitwise():
    a = render_table(run(make_benchmark(seed=5)).report, "json")
    b = render_table(run(make_benchmark(seed=5)).report, "json")
    assert a == b
    ev_a = json.dumps(run(make_benchmark(seed=5)).events, sort_keys=True)
    ev_b = json.dumps(run(make_benchmark(seed=5)).events, sort_keys=True)
    assert ev_a == ev_b


def test_render_text_four_column_groups():
    result = run(make_benchmark())
    text = render_table(result.report, "text")
    header = text.splitlines()[0]
    assert all(org in header for org in ("O1", "O2", "O3", "O4"))
    assert len(text.splitlines()) == 13  # header + 12 launch rows


def test_render_empty_report():
    assert render_table(LatencyReport(), "text").startswith("service")
    assert render_table(LatencyReport(), "csv").startswith("requester_org")


def test_csv_json_round_trip():
    result = run(make_lifecycle())
    doc = json.loads(render_table(result.report, "json"))
    csv_text = render_table(result.report, "csv")
    lines = csv_text.strip().splitlines()
    header = lines[0].split(",")
    rebuilt = []
    for line in lines[1:]:
        cells = dict(zip(header, line.split(",")))
        cells["t_service_ms"] = int(cells["t_service_ms"])
        rebuilt.append(cells)
    assert rebuilt == doc["rows"]


def test_lifecycle_overlap_grows_then_shrinks():
    result = run(make_lifecycle())
    assert result.report.errors == []
    classes = [r.path_class for r in result.report.rows]
    assert classes == ["Local", "NewOverlap", "ExtendOverlap", "NewOverlap"]
    # all sessions were closed, so the shares are gone again
    o1 = result.nodes["O1"]
    assert o1.df.search("O2.*") == []
    assert result.nodes["O2"].df.search("O1.*") == []


def test_kill_action_triggers_recreation():
    orgs = make_orgs(1, 2)
    scenario = Scenario(
        name="kill",
        orgs=orgs,
        net=NetConfig(),
        script=[
            ScriptStep(0, "O1", "open", {"service": "O1.PLC1", "ra": "R1"}),
            ScriptStep(1000, "O1", "kill", {"agent": "C1"}),
        ],
        settle_ms=6000,
    )
    result = run(scenario)
    node = result.nodes["O1"]
    assert "C1" in node.ams
    assert any(e["kind"] == "AgentRecreated" for e in result.events)


def test_per_row_errors_recorded_run_continues():
    scenario = Scenario(
        name="err",
        orgs=make_orgs(2),
        script=[
            ScriptStep(0, "O1", "open", {"service": "O9.PLC99", "ra": "R1"}),
            ScriptStep(100, "O1", "open", {"service": "O1.PLC1", "ra": "R2"}),
        ],
        settle_ms=6000,
    )
    result = run(scenario)
    assert len(result.report.rows) == 1
    assert result.report.rows[0].path_class == "Local"
    assert len(result.report.errors) == 1
    assert result.report.errors[0]["reason"] == "ServiceUnknownEverywhere"


def test_summary_statistics():
    report = LatencyReport(
        rows=[
            LatencyRecord("O1", "O1.PLC1", "Local", 0),
            LatencyRecord("O1", "O2.PLC7", "NewOverlap", 400),
            LatencyRecord("O1", "O2.PLC8", "NewOverlap", 400),
        ]
    )
    summary = report.summary()
    assert summary["Local"]["count"] == 1
    assert summary["NewOverlap"] == {"count": 2, "mean": 400.0, "min": 400, "max": 400}
