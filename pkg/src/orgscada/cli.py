"""Command-line interface: scenario runs, scenario listing, and live serving."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .errors import OrgScadaError
from .harness import (
    BUILTIN_SCENARIOS,
    hop_count_oracle,
    load_scenario,
    render_table,
    run,
)
from .livenet import LiveWorld
from .org import boot_organization
from .xmlconfig import load_org_config


def _get_scenario(name_or_path: str, seed: int | None):
    if name_or_path in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[name_or_path](seed=seed or 0)
    scenario = load_scenario(name_or_path)
    if seed is not None:
        scenario.net.seed = seed
        for org in scenario.orgs:
            org.seed = seed
    return scenario


def _check_invariants(scenario, result) -> list[str]:
    violations = []
    d = scenario.net.default_hop_latency_ms
    uniform = not scenario.net.hop_latency_ms and scenario.net.intra_org_latency_ms == 0
    if uniform:
        for i, row in enumerate(result.report.rows):
            expected = hop_count_oracle(row.path_class) * d
            if abs(row.t_service_ms - expected) > 1:
                violations.append(
                    f"row {i}: {row.service_name} from {row.requester_org} "
                    f"({row.path_class}) took {row.t_service_ms} ms, expected {expected}"
                )
    return violations


def cmd_run(args) -> int:
    scenario = _get_scenario(args.scenario, args.seed)
    result = run(scenario)
    sys.stdout.write(render_table(result.report, args.format))
    for err in result.report.errors:
        print(f"error: {err}", file=sys.stderr)
    violations = _check_invariants(scenario, result)
    for v in violations:
        print(f"invariant violation: {v}", file=sys.stderr)
    return 2 if violations else 0


def cmd_list_scenarios(args) -> int:
    for name, factory in sorted(BUILTIN_SCENARIOS.items()):
        doc = (factory.__doc__ or "").strip().splitlines()[0]
        print(f"{name:12s} {doc}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn
    import threading

    from .gateway import create_app

    config_dir = Path(args.config)
    org_dirs = sorted(
        p for p in config_dir.iterdir() if p.is_dir() and (p / "processes.xml").exists()
    )
    if not org_dirs:
        print(f"no organization configs under {config_dir}", file=sys.stderr)
        return 1
    world = LiveWorld()
    world.start()
    nodes = []
    for org_dir in org_dirs:
        cfg = load_org_config(org_dir / "processes.xml", org_dir / "acquaintances.xml")
        node = world.call(lambda c=cfg: boot_organization(world, c))
        if cfg.listen_address:
            world.listen(cfg.listen_address)
        for acq in cfg.acquaintances:
            if acq.address:
                world.add_peer(acq.org_name, acq.address)
        nodes.append(node)

    host, _, port = args.http_listen.rpartition(":")
    base_port = int(port)
    servers = []
    for i, node in enumerate(nodes):
        app = create_app(node, world)
        server = uvicorn.Server(
            uvicorn.Config(app, host=host or "127.0.0.1", port=base_port + i, log_level="warning")
        )
        threading.Thread(target=server.run, daemon=True).start()
        servers.append(server)
        print(f"{node.org_name}: http://{host or '127.0.0.1'}:{base_port + i}")
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        for server in servers:
            server.should_exit = True
        world.stop()
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="orgscada")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and print its latency table")
    p_run.add_argument("--scenario", required=True, help="builtin name or scenario JSON file")
    p_run.add_argument("--format", default="text", choices=("text", "csv", "json"))
    p_run.add_argument("--seed", type=int, default=None)
    p_run.set_defaults(fn=cmd_run)

    p_list = sub.add_parser("list-scenarios", help="list builtin scenarios")
    p_list.set_defaults(fn=cmd_list_scenarios)

    p_serve = sub.add_parser("serve", help="boot live nodes with HTTP gateways")
    p_serve.add_argument("--config", required=True, help="directory of per-org config folders")
    p_serve.add_argument("--http-listen", default="127.0.0.1:8000")
    p_serve.set_defaults(fn=cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except OrgScadaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
