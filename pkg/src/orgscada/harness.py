"""Deterministic scenario runner and benchmark harness.

A Scenario boots N organizations on the simulated network and replays a
scripted sequence of operator launches, setpoints, session closes, and fault
injections.  The result is a latency report (one row per successful service
open, with its resolution path class) plus the merged adaptation event log.
Identical scenarios produce bitwise-identical reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .errors import ScenarioInvalid
from .kernel import Node
from .org import OrganizationConfig, boot_organization, spawn_operator
from .plantsim import PlcConfig, synthetic_variables
from .scada import (
    LatencyRecord,
    PATH_EXTEND,
    PATH_LOCAL,
    PATH_NEW,
    PATH_SHARED,
)
from .simnet import SimWorld
from .wire import NetConfig

__all__ = [
    "BUILTIN_SCENARIOS",
    "LatencyReport",
    "RunResult",
    "Scenario",
    "ScriptStep",
    "hop_count_oracle",
    "load_scenario",
    "make_lifecycle",
    "make_orgs",
    "make_benchmark",
    "render_table",
    "run",
]

ACTIONS = ("open", "close", "setpoint", "kill", "pause")


@dataclass
class ScriptStep:
    at: int
    org: str
    action: str
    args: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {"at": self.at, "org": self.org, "action": self.action, **self.args}

    @classmethod
    def from_doc(cls, doc: dict) -> "ScriptStep":
        args = {k: v for k, v in doc.items() if k not in ("at", "org", "action")}
        return cls(at=int(doc["at"]), org=doc["org"], action=doc["action"], args=args)


@dataclass
class Scenario:
    name: str
    orgs: list[OrganizationConfig]
    net: NetConfig = field(default_factory=NetConfig)
    script: list[ScriptStep] = field(default_factory=list)
    settle_ms: int = 2000

    def validate(self) -> None:
        org_names = {cfg.org_name for cfg in self.orgs}
        if len(org_names) != len(self.orgs):
            raise ScenarioInvalid("duplicate organization names")
        last = 0
        for step in self.script:
            if step.action not in ACTIONS:
                raise ScenarioInvalid(f"unknown action {step.action!r}")
            if step.at < last:
                raise ScenarioInvalid("script times must be non-decreasing")
            last = step.at
            if step.org not in org_names:
                raise ScenarioInvalid(f"script references unknown org {step.org!r}")

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "net": {
                "default_hop_latency_ms": self.net.default_hop_latency_ms,
                "hop_latency_ms": dict(self.net.hop_latency_ms),
                "intra_org_latency_ms": self.net.intra_org_latency_ms,
                "seed": self.net.seed,
            },
            "settle_ms": self.settle_ms,
            "orgs": [cfg.to_doc() for cfg in self.orgs],
            "script": [step.to_doc() for step in self.script],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Scenario":
        net_doc = doc.get("net", {})
        net = NetConfig(
            default_hop_latency_ms=int(net_doc.get("default_hop_latency_ms", 100)),
            hop_latency_ms={k: int(v) for k, v in net_doc.get("hop_latency_ms", {}).items()},
            intra_org_latency_ms=int(net_doc.get("intra_org_latency_ms", 0)),
            seed=int(net_doc.get("seed", 0)),
        )
        scenario = cls(
            name=doc.get("name", "unnamed"),
            orgs=[OrganizationConfig.from_doc(d) for d in doc.get("orgs", [])],
            net=net,
            script=[ScriptStep.from_doc(d) for d in doc.get("script", [])],
            settle_ms=int(doc.get("settle_ms", 2000)),
        )
        scenario.validate()
        return scenario


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioInvalid(f"{path}: {exc}") from None
    return Scenario.from_doc(doc)


@dataclass
class LatencyReport:
    rows: list[LatencyRecord] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    def summary(self) -> dict[str, dict]:
        out: dict[str, dict] = {}
        for path in (PATH_LOCAL, PATH_SHARED, PATH_EXTEND, PATH_NEW):
            ts = [r.t_service_ms for r in self.rows if r.path_class == path]
            if ts:
                out[path] = {
                    "count": len(ts),
                    "mean": sum(ts) / len(ts),
                    "min": min(ts),
                    "max": max(ts),
                }
        return out

    def to_doc(self) -> dict:
        return {
            "rows": [r.to_doc() for r in self.rows],
            "errors": list(self.errors),
            "summary": self.summary(),
        }


@dataclass
class RunResult:
    report: LatencyReport
    events: list[dict]
    world: SimWorld
    nodes: dict[str, Node]


def run(scenario: Scenario) -> RunResult:
    scenario.validate()
    world = SimWorld(net=scenario.net)
    nodes: dict[str, Node] = {}
    for cfg in scenario.orgs:
        nodes[cfg.org_name] = boot_organization(world, cfg)
    world.drain_messages()  # settle the boot sequence

    report = LatencyReport()
    # row slots are claimed in launch order so that the report order never
    # depends on resolution timing
    rows: list[Optional[LatencyRecord]] = []
    operators: dict[tuple[str, str], object] = {}

    def do_open(step: ScriptStep) -> None:
        node = nodes[step.org]
        ra = spawn_operator(node, step.args.get("ra"))
        operators[(step.org, ra.aid.local_name)] = ra
        slot = len(rows)
        rows.append(None)
        service = step.args["service"]

        def on_ready(session, error):
            if error is not None:
                report.errors.append(
                    {"org": step.org, "service": service, "reason": error, "row": slot}
                )
            else:
                rows[slot] = session.latency

        ra.open(service, on_ready=on_ready)

    def do_step(step: ScriptStep) -> None:
        node = nodes[step.org]
        if step.action == "open":
            do_open(step)
        elif step.action == "close":
            ra = operators.get((step.org, step.args["ra"]))
            if ra is not None:
                ra.close()
        elif step.action == "setpoint":
            ra = operators.get((step.org, step.args["ra"]))
            if ra is not None:
                ra.send_setpoint(step.args["var"], step.args["value"])
        elif step.action == "kill":
            if step.args.get("mode") == "destroy":
                from .kernel import AgentId

                node.destroy_agent(AgentId(step.args["agent"], node.org_name))
            else:
                node.crash_agent(step.args["agent"])
        elif step.action == "pause":
            agent = node.ams.get(step.args["agent"])
            if agent is not None:
                agent.pause(int(step.args.get("duration_ms", 1000)))

    for step in scenario.script:
        world.schedule(step.at - world.now_ms, lambda s=step: do_step(s))
        world.run_until(step.at)
    horizon = (scenario.script[-1].at if scenario.script else 0) + scenario.settle_ms
    world.run_until(horizon)
    world.drain_messages()

    report.rows = [r for r in rows if r is not None]
    events = []
    for org_name in sorted(nodes):
        for ev in nodes[org_name].events:
            events.append(
                {"at": ev.at, "org": ev.org, "kind": ev.kind, "detail": ev.detail}
            )
    events.sort(key=lambda e: (e["at"], e["org"]))
    return RunResult(report=report, events=events, world=world, nodes=nodes)


# ----------------------------------------------------------------------
# independent latency oracle

# Critical-path message cascade per resolution path, written as a protocol
# table: message -> list of (from_party, to_party, next_message) follow-ups.
# The oracle walks the cascade and counts inter-organization hops on the
# longest causal chain; it never looks at the runtime implementation.
_PROTOCOL_TABLES: dict[str, dict[str, list[tuple[str, str, str]]]] = {
    PATH_LOCAL: {"start": []},
    PATH_SHARED: {"start": []},
    PATH_EXTEND: {
        "start": [("requester-gs", "owner-gs", "share-request")],
        "share-request": [("owner-gs", "owner-ca", "register-instruct")],
        "register-instruct": [("owner-ca", "requester-df", "remote-register")],
        "remote-register": [],
    },
    PATH_NEW: {
        "start": [("requester-gs", "peer-gs", "cfp")],
        "cfp": [("peer-gs", "requester-gs", "propose")],
        "propose": [("requester-gs", "winner-gs", "accept")],
        "accept": [("winner-gs", "winner-ca", "register-instruct")],
        "register-instruct": [("winner-ca", "requester-df", "remote-register")],
        "remote-register": [],
    },
}

_PARTY_ORG = {
    "requester-gs": "requester",
    "requester-df": "requester",
    "owner-gs": "owner",
    "owner-ca": "owner",
    "peer-gs": "peer",
    "winner-gs": "peer",
    "winner-ca": "peer",
}


def hop_count_oracle(path_class: str, n_acquaintances: int = 1) -> int:
    """Expected inter-organization hops on the critical resolution path."""
    table = _PROTOCOL_TABLES[path_class]

    def walk(message: str) -> int:
        best = 0
        for frm, to, nxt in table[message]:
            hop = 1 if _PARTY_ORG[frm] != _PARTY_ORG[to] else 0
            best = max(best, hop + walk(nxt))
        return best

    return walk("start")


# ----------------------------------------------------------------------
# rendering

_COLUMNS = ("requester_org", "service_name", "path_class", "t_service_ms")


def render_table(report: LatencyReport, format: str = "text") -> str:
    if format == "json":
        return json.dumps(report.to_doc(), sort_keys=True, indent=2)
    if format == "csv":
        lines = [",".join(_COLUMNS)]
        for r in report.rows:
            doc = r.to_doc()
            lines.append(",".join(str(doc[c]) for c in _COLUMNS))
        return "\n".join(lines) + "\n"
    if format != "text":
        raise ValueError(f"unknown format {format!r}")
    # text: one column group per requester org, rows in launch order
    groups: dict[str, list[LatencyRecord]] = {}
    for r in report.rows:
        groups.setdefault(r.requester_org, []).append(r)
    orgs = sorted(groups)
    if not orgs:
        return "service  path  t_ms\n"
    height = max(len(v) for v in groups.values())
    widths = {}
    cells: dict[str, list[str]] = {}
    for org in orgs:
        col = [f"{r.service_name}  {r.path_class}  {r.t_service_ms}" for r in groups[org]]
        header = f"{org}: service  path  t_ms"
        widths[org] = max(len(header), *(len(c) for c in col))
        cells[org] = [header] + col + [""] * (height - len(col))
    lines = []
    for i in range(height + 1):
        lines.append("  | ".join(cells[org][i].ljust(widths[org]) for org in orgs).rstrip())
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# builtin scenarios

def make_orgs(
    n_orgs: int,
    plcs_per_org: int = 6,
    seed: int = 0,
    fully_acquainted: bool = True,
) -> list[OrganizationConfig]:
    """Standard deployment: O1..On, PLC numbering continuous across orgs."""
    from .org import Acquaintance

    names = [f"O{i + 1}" for i in range(n_orgs)]
    out = []
    for i, name in enumerate(names):
        first = i * plcs_per_org + 1
        plcs = [
            PlcConfig(plc_name=f"{name}.PLC{k}", variables=synthetic_variables())
            for k in range(first, first + plcs_per_org)
        ]
        acqs = [Acquaintance(p) for p in names if p != name] if fully_acquainted else []
        out.append(
            OrganizationConfig(org_name=name, acquaintances=acqs, plcs=plcs, seed=seed)
        )
    return out


# The 4-organization benchmark script: 12 launches per org, interleaved
# round-robin, 150 ms apart.  Each entry is the service requested by the
# n-th launch within that organization.
_BENCHMARK_LAUNCHES: dict[str, list[str]] = {
    "O1": [
        "O1.PLC1",
        "O2.PLC7",
        "O2.PLC8",
        "O2.PLC8",
        "O3.PLC14",
        "O3.PLC15",
        "O4.PLC19",
        "O4.PLC20",
        "O4.PLC21",
        "O3.PLC17",
        "O4.PLC23",
        "O4.PLC20",
    ],
    "O2": [
        "O2.PLC7",
        "O1.PLC1",
        "O1.PLC2",
        "O1.PLC3",
        "O3.PLC13",
        "O3.PLC14",
        "O4.PLC19",
        "O4.PLC20",
        "O4.PLC21",
        "O2.PLC8",
        "O1.PLC5",
        "O1.PLC6",
    ],
    "O3": [
        "O3.PLC13",
        "O3.PLC14",
        "O3.PLC15",
        "O1.PLC1",
        "O1.PLC5",
        "O2.PLC7",
        "O2.PLC8",
        "O4.PLC19",
        "O4.PLC20",
        "O3.PLC16",
        "O3.PLC17",
        "O3.PLC18",
    ],
    "O4": [
        "O4.PLC19",
        "O4.PLC20",
        "O4.PLC21",
        "O4.PLC22",
        "O4.PLC23",
        "O4.PLC24",
        "O1.PLC1",
        "O1.PLC4",
        "O3.PLC13",
        "O3.PLC14",
        "O2.PLC7",
        "O2.PLC8",
    ],
}


def make_benchmark(seed: int = 0, hop_latency_ms: int = 100) -> Scenario:
    """48-launch benchmark over 4 organizations of 6 PLCs each."""
    orgs = make_orgs(4, 6, seed=seed)
    script = []
    org_names = ["O1", "O2", "O3", "O4"]
    spacing = 150
    for row in range(12):
        for col, org in enumerate(org_names):
            at = (row * 4 + col) * spacing
            script.append(
                ScriptStep(
                    at=at,
                    org=org,
                    action="open",
                    args={"service": _BENCHMARK_LAUNCHES[org][row], "ra": f"R{row + 1}"},
                )
            )
    return Scenario(
        name="benchmark",
        orgs=orgs,
        net=NetConfig(default_hop_latency_ms=hop_latency_ms, seed=seed),
        script=script,
    )


def make_lifecycle(seed: int = 0, hop_latency_ms: int = 100) -> Scenario:
    """Small reorganization timeline: overlap grows, then shrinks again.

    Two organizations start isolated; cross-org opens establish and extend an
    overlap, a reverse-direction open creates the mutual link, and the session
    closes release the shares.
    """
    orgs = make_orgs(2, 3, seed=seed)
    script = [
        ScriptStep(at=0, org="O1", action="open", args={"service": "O1.PLC1", "ra": "R1"}),
        ScriptStep(at=1000, org="O1", action="open", args={"service": "O2.PLC4", "ra": "R2"}),
        ScriptStep(at=2000, org="O1", action="open", args={"service": "O2.PLC5", "ra": "R3"}),
        ScriptStep(at=3000, org="O2", action="open", args={"service": "O1.PLC2", "ra": "R1"}),
        ScriptStep(at=4000, org="O1", action="close", args={"ra": "R2"}),
        ScriptStep(at=5000, org="O1", action="close", args={"ra": "R3"}),
        ScriptStep(at=6000, org="O2", action="close", args={"ra": "R1"}),
        ScriptStep(at=7000, org="O1", action="close", args={"ra": "R1"}),
    ]
    return Scenario(
        name="lifecycle",
        orgs=orgs,
        net=NetConfig(default_hop_latency_ms=hop_latency_ms, seed=seed),
        script=script,
    )


BUILTIN_SCENARIOS = {"benchmark": make_benchmark, "lifecycle": make_lifecycle}
