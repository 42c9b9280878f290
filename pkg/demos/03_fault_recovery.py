"""Fault recovery: a crashed provider is recreated and the session resumes.

An operator in O1 watches a PLC served by O2. The serving control agent is
crashed mid-session; the local supervisor detects the missed heartbeat,
recreates the agent, the shared registration is restored into O1's
directory, and the operator's data flow resumes without reopening.
"""

from orgscada import NetConfig, SimWorld, boot_organization, make_orgs, spawn_operator

world = SimWorld(NetConfig(default_hop_latency_ms=100))
nodes = {cfg.org_name: boot_organization(world, cfg) for cfg in make_orgs(2, 3)}
world.drain_messages()

events = []
ra = spawn_operator(nodes["O1"])
ra.open("O2.PLC4", on_ready=lambda s, e: None, on_event=events.append)
world.run_for(2000)

print(f"session open, {sum(1 for e in events if e['type'] == 'value')} values received")

t_crash = world.now_ms
nodes["O2"].crash_agent("C4")
print(f"\n{t_crash} ms: crashed C4@O2 (serves O2.PLC4)")

world.run_for(5000)
world.drain_messages()

for ev in nodes["O2"].events:
    if ev.kind in ("AgentFailed", "AgentRecreated"):
        print(f"{ev.at:6d} ms  O2: {ev.kind} {ev.detail.get('agent', '')}")

resub = next(e for e in events if e.get("state") == "resubscribed")
print(f"{resub['t']:6d} ms  operator resubscribed to the recreated provider")
resumed = sum(1 for e in events if e["type"] == "value" and e["t"] > resub["t"])
print(f"values after recovery: {resumed}")
print(f"remote registration restored in O1: {len(nodes['O1'].df.search('O2.PLC4')) == 1}")
