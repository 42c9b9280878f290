"""Live deployment: two organizations in separate worlds, peered over TCP.

Same agents and protocols as the simulation, but on wall-clock time with the
length-prefixed frame codec over real sockets. An operator in O1 negotiates
a session against O2's PLC across the wire and streams live values.
"""

import threading
import time

from orgscada import boot_organization, make_orgs, spawn_operator
from orgscada.livenet import LiveWorld

cfgs = make_orgs(2, 2)
worlds = {}
nodes = {}
for cfg in cfgs:
    world = LiveWorld()
    world.start()
    nodes[cfg.org_name] = world.call(lambda c=cfg, w=world: boot_organization(w, c))
    worlds[cfg.org_name] = world

addr = {org: worlds[org].listen("127.0.0.1:0") for org in worlds}
for org, world in worlds.items():
    for peer, peer_addr in addr.items():
        if peer != org:
            world.add_peer(peer, peer_addr)
print(f"listening: {addr}")

done = threading.Event()
box = {}
values = []


def on_ready(session, error):
    box["session"], box["error"] = session, error
    done.set()


world = worlds["O1"]
ra = world.call(lambda: spawn_operator(nodes["O1"]))
world.call(lambda: ra.open("O2.PLC3", on_ready=on_ready, on_event=values.append))
done.wait(10)

session = box["session"]
print(
    f"opened {session.service.service_name} via {session.latency.path_class} "
    f"in {session.latency.t_service_ms} ms"
)

time.sleep(2.0)
for ev in [e for e in values if e["type"] == "value"][:5]:
    print(f"  {ev['var']}: {ev['value']:.2f} ({ev['quality']})")

world.call(ra.close)
time.sleep(0.5)
for w in worlds.values():
    w.stop()
print("released and shut down")
