"""Overlap lifecycle: links appear on demand and vanish when released.

Two organizations; operators in O1 open sessions against O2's PLCs, the
organizations grow a shared boundary, and closing the sessions shrinks it
back to nothing.
"""

from orgscada import make_lifecycle, run

result = run(make_lifecycle())

print("service opens, in order:")
for row in result.report.rows:
    print(
        f"  t_service={row.t_service_ms:4d} ms  {row.requester_org} -> "
        f"{row.service_name:9s} [{row.path_class}]"
    )

print()
print("adaptation events:")
interesting = {"OverlapEstablished", "ShareExtended", "ShareReleased"}
for ev in result.events:
    if ev["kind"] in interesting:
        detail = ev["detail"]
        print(f"  {ev['at']:6d} ms  {ev['org']}: {ev['kind']} {detail.get('service_name', '')}")

print()
print("final topology (everything released):")
topo = result.nodes["O1"].gs.topology()
print(f"  orgs:  {topo['orgs']}")
print(f"  links: {topo['links']}")
