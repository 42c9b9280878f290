"""Acceptance gate: one test per top-level guarantee, one PASS/FAIL line each.

Every test prints ``ACCEPTANCE <name>: PASS`` (or FAIL) so the gate reads as a
checklist under ``pytest -s``.  Tolerances are pinned in the assertions.
"""

import base64
import functools
import json
import os
import random

import pytest

from orgscada import (
    NetConfig,
    SimWorld,
    boot_organization,
    hop_count_oracle,
    make_orgs,
    make_benchmark,
    render_table,
    run,
    spawn_operator,
)
from orgscada.errors import CodecError, SessionClosed
from orgscada.harness import Scenario, ScriptStep
from orgscada.scada import PATH_EXTEND, PATH_LOCAL, PATH_NEW, PATH_SHARED
from orgscada.wire import MessageEnvelope, decode, encode

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def checklist(name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"ACCEPTANCE {name}: FAIL")
                raise
            print(f"ACCEPTANCE {name}: PASS")

        return wrapper

    return deco


# ----------------------------------------------------------------------
# 1. benchmark reproduction


@checklist("benchmark-ordinal-reproduction")
def test_benchmark_path_classes_and_latency_ordering():
    with open(os.path.join(FIXTURES, "benchmark_classes.json")) as fh:
        expected = json.load(fh)["orgs"]
    result = run(make_benchmark())
    assert result.report.errors == []
    assert len(result.report.rows) == 48
    for org, launches in expected.items():
        got = [r for r in result.report.rows if r.requester_org == org]
        assert [r.service_name for r in got] == [l["service"] for l in launches]
        assert [r.path_class for r in got] == [l["expected_class"] for l in launches]
    # strict mean ordering: in-directory resolution beats a share extension
    # beats a fresh negotiation
    summary = result.report.summary()
    assert summary[PATH_LOCAL]["mean"] < summary[PATH_EXTEND]["mean"]
    assert summary[PATH_SHARED]["mean"] < summary[PATH_EXTEND]["mean"]
    assert summary[PATH_EXTEND]["mean"] < summary[PATH_NEW]["mean"]


# ----------------------------------------------------------------------
# 2. oracle equivalence on randomized deployments


@checklist("hop-oracle-equivalence-100-scenarios")
def test_measured_latency_matches_hop_oracle_on_random_scenarios():
    checked = 0
    for scenario_seed in range(100):
        rng = random.Random(scenario_seed)
        n_orgs = rng.randint(2, 6)
        plcs = rng.randint(1, 8)
        orgs = make_orgs(n_orgs, plcs, seed=scenario_seed)
        services = [p.plc_name for cfg in orgs for p in cfg.plcs]
        org_names = [cfg.org_name for cfg in orgs]
        hop_ms = rng.choice((50, 100, 150))
        script = []
        # spaced far enough apart that every resolution completes before the
        # next launch, so each row is a clean single-path measurement
        for i in range(rng.randint(4, 10)):
            script.append(
                ScriptStep(
                    at=i * 800,
                    org=rng.choice(org_names),
                    action="open",
                    args={"service": rng.choice(services)},
                )
            )
        scenario = Scenario(
            name=f"random-{scenario_seed}",
            orgs=orgs,
            net=NetConfig(default_hop_latency_ms=hop_ms),
            script=script,
        )
        result = run(scenario)
        assert result.report.errors == []
        for row in result.report.rows:
            want = hop_count_oracle(row.path_class) * hop_ms
            assert abs(row.t_service_ms - want) <= 1, (scenario_seed, row)
            checked += 1
    assert checked >= 100


# ----------------------------------------------------------------------
# 3. monotone learning


@checklist("monotone-learning-per-org-pair")
def test_repeat_requests_to_same_provider_never_get_slower():
    result = run(make_benchmark())
    series: dict[tuple[str, str], list[int]] = {}
    for row in result.report.rows:
        owner = row.service_name.split(".")[0]
        if owner == row.requester_org:
            continue
        series.setdefault((row.requester_org, owner), []).append(row.t_service_ms)
    assert series  # the benchmark exercises cross-org requests
    for pair, ts in series.items():
        for earlier, later in zip(ts, ts[1:]):
            assert later <= earlier, (pair, ts)
        # the first contact pays the full negotiation; everything after is
        # strictly cheaper
        assert all(t < ts[0] for t in ts[1:]), (pair, ts)


# ----------------------------------------------------------------------
# 4. overlap soundness and negotiation safety


def _assert_overlap_sound(nodes):
    for org, node in nodes.items():
        links = node.gs.links
        for peer, link in links.items():
            for service in link.shared_in:
                entries = nodes[org].df.search(service)
                assert any(e.home_org == peer for e in entries), (org, peer, service)
            peer_links = nodes[peer].gs.links
            assert org in peer_links, (org, peer)
            assert link.shared_in == peer_links[org].shared_out, (org, peer)
        for entry in node.df.entries:
            if entry.home_org != org:
                assert entry.service_name in links[entry.home_org].shared_in


def _assert_cnp_safe(traffic):
    convs: dict[str, dict] = {}
    for env in traffic:
        if env.protocol != "ContractNet":
            continue
        conv = convs.setdefault(
            env.conversation_id, {"proposers": set(), "accepts": []}
        )
        if env.performative == "PROPOSE":
            conv["proposers"].add(env.sender)
        elif env.performative == "ACCEPT_PROPOSAL":
            conv["accepts"].append(env.receiver)
    for conv_id, conv in convs.items():
        assert len(conv["accepts"]) <= 1, conv_id
        for winner in conv["accepts"]:
            assert winner in conv["proposers"], conv_id


@checklist("overlap-soundness-random-interleavings")
def test_overlap_invariant_holds_under_random_open_close_kill():
    for seed in range(10):
        rng = random.Random(1000 + seed)
        world = SimWorld(NetConfig(default_hop_latency_ms=100))
        traffic = []
        world.taps.append(traffic.append)
        nodes = {}
        for cfg in make_orgs(3, 2, seed=seed):
            nodes[cfg.org_name] = boot_organization(world, cfg)
        world.drain_messages()
        services = [
            p.plc_name for node in nodes.values() for p in node.gs.config.plcs
        ]
        open_ras = []
        for _ in range(20):
            op = rng.random()
            org = rng.choice(sorted(nodes))
            node = nodes[org]
            if op < 0.55 or not open_ras:
                ra = spawn_operator(node)
                ra.open(rng.choice(services), on_ready=lambda s, e: None)
                open_ras.append(ra)
            elif op < 0.85:
                ra = open_ras.pop(rng.randrange(len(open_ras)))
                if ra.session is not None and not ra.session.closed:
                    ra.close()
            else:
                cas = [n for n in node.ams if n.startswith("C")]
                if cas:
                    node.crash_agent(rng.choice(cas))
            world.run_for(rng.choice((50, 300, 900)))
        world.run_for(8000)
        world.drain_messages()
        _assert_overlap_sound(nodes)
        _assert_cnp_safe(traffic)


@checklist("negotiation-safety-with-winner-failure")
def test_cnp_stays_safe_when_awarded_peer_dies():
    world = SimWorld(NetConfig(default_hop_latency_ms=100))
    traffic = []
    world.taps.append(traffic.append)
    nodes = {}
    for cfg in make_orgs(3, 2):
        nodes[cfg.org_name] = boot_organization(world, cfg)
    world.drain_messages()
    # O2 and O3 both serve O2.PLC3's name?  No -- give them a common service
    # by letting O3 win a share first, then killing it mid-award.
    boxes = []
    ra = spawn_operator(nodes["O1"])
    ra.open("O2.PLC3", on_ready=lambda s, e: boxes.append((s, e)))
    world.run_for(250)  # CFP out, proposals in flight
    nodes["O2"].crash_agent("GS")
    world.run_for(6000)
    world.drain_messages()
    _assert_cnp_safe(traffic)
    accepts = [
        e for e in traffic
        if e.protocol == "ContractNet" and e.performative == "ACCEPT_PROPOSAL"
    ]
    # the award either completed before the crash or was not double-sent
    assert len(accepts) <= 2  # at most original + one re-award conversation
    assert len({e.conversation_id for e in accepts}) == len(accepts)


# ----------------------------------------------------------------------
# 5. fault recovery


@checklist("fault-recovery-within-heartbeat-bound")
def test_provider_crash_recovers_and_session_resumes():
    world = SimWorld(NetConfig(default_hop_latency_ms=100))
    nodes = {}
    for cfg in make_orgs(2, 3):
        nodes[cfg.org_name] = boot_organization(world, cfg)
    world.drain_messages()
    events = []
    ra = spawn_operator(nodes["O1"])
    ra.open("O2.PLC4", on_ready=lambda s, e: None, on_event=events.append)
    world.run_for(2000)
    defaults = nodes["O2"].gs.config.defaults
    nodes["O2"].crash_agent("C4")
    t_crash = world.now_ms
    bound = (defaults.heartbeat_miss_limit + 1) * defaults.heartbeat_period_ms
    world.run_for(bound)
    recreated = [e for e in nodes["O2"].events if e.kind == "AgentRecreated"]
    assert recreated and recreated[-1].at - t_crash <= bound
    assert len(nodes["O1"].df.search("O2.PLC4")) == 1  # remote entry restored
    world.run_for(3000)
    world.drain_messages()
    resubs = [e for e in events if e.get("state") == "resubscribed"]
    assert resubs
    late_values = [
        e for e in events if e["type"] == "value" and e["t"] > resubs[-1]["t"]
    ]
    assert late_values  # data flow resumed on the recreated provider


# ----------------------------------------------------------------------
# 6. setpoint safety


@checklist("adversarial-setpoint-safety")
def test_random_setpoints_never_breach_variable_ranges():
    world = SimWorld(NetConfig(default_hop_latency_ms=100))
    nodes = {}
    for cfg in make_orgs(2, 2, seed=7):
        nodes[cfg.org_name] = boot_organization(world, cfg)
    world.drain_messages()
    ra = spawn_operator(nodes["O1"])
    ra.open("O2.PLC3", on_ready=lambda s, e: None)
    world.run_for(2000)
    world.drain_messages()
    ca = next(
        a for a in nodes["O2"].ams.values() if "O2.PLC3" in getattr(a, "plcs", ())
    )
    plc = ca.plcs["O2.PLC3"]
    specs = {v.name: v for v in plc.config.variables}
    rng = random.Random(42)
    verdicts = []
    for _ in range(200):
        var = rng.choice(list(specs) + ["bogus_tag"])
        value = rng.choice(
            (
                rng.uniform(-1e6, 1e6),
                rng.uniform(specs.get(var, specs["temperature"]).min,
                            specs.get(var, specs["temperature"]).max),
                float("nan") if rng.random() < 0.1 else rng.uniform(-500, 500),
            )
        )
        ra.send_setpoint(var, value, on_verdict=lambda ok, why: verdicts.append((ok, why, var, value)))
        world.run_for(300)
        for name, spec in specs.items():
            now = plc.read(name)["value"]
            assert spec.min <= now <= spec.max, (name, now)
    assert verdicts
    for ok, why, var, value in verdicts:
        spec = specs.get(var)
        if ok:
            assert spec is not None and spec.writable
            assert spec.min <= value <= spec.max
        else:
            assert why  # every rejection carries a reason
    ra.close()
    world.run_for(2000)
    world.drain_messages()
    with pytest.raises(SessionClosed):
        ra.send_setpoint("temperature", 50.0)


# ----------------------------------------------------------------------
# 7. determinism


@checklist("bitwise-determinism")
def test_identical_scenarios_produce_identical_reports_and_logs():
    a = run(make_benchmark(seed=3))
    b = run(make_benchmark(seed=3))
    assert render_table(a.report, "json") == render_table(b.report, "json")
    assert a.events == b.events
    # and a different seed still reproduces itself
    c = run(make_benchmark(seed=99))
    d = run(make_benchmark(seed=99))
    assert render_table(c.report, "json") == render_table(d.report, "json")
    assert c.events == d.events


# ----------------------------------------------------------------------
# 8. codec


@checklist("codec-golden-and-fuzz")
def test_codec_matches_goldens_and_survives_fuzzing():
    with open(os.path.join(FIXTURES, "golden_frames.json")) as fh:
        goldens = json.load(fh)
    for case in goldens:
        frame = base64.b64decode(case["frame_b64"])
        assert encode(MessageEnvelope(**case["doc"])) == frame
        got = decode(frame)
        for key, value in case["doc"].items():
            assert getattr(got, key) == value
    rng = random.Random(8)
    for _ in range(10_000):
        blob = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 64)))
        try:
            decode(blob)
        except CodecError:
            pass  # any structured rejection is fine; crashes are not
    perfs = ("INFORM", "REQUEST", "FAILURE", "SUBSCRIBE")
    for i in range(200):
        env = MessageEnvelope(
            performative=rng.choice(perfs),
            sender=f"A{i}@O1",
            receiver="B@O2",
            conversation_id=f"c{i}",
            protocol="DataFeed",
            payload={"type": "x", "n": rng.random()},
            sent_at=i,
        )
        assert decode(encode(env)) == env
