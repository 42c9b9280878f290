import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from orgscada import boot_organization, make_orgs
from orgscada.gateway import create_app
from orgscada.livenet import LiveWorld


@pytest.fixture
def deployment():
    world = LiveWorld()
    world.start()
    nodes = {}
    for cfg in make_orgs(2, 3):
        nodes[cfg.org_name] = world.call(lambda c=cfg: boot_organization(world, c))
    clients = {
        org: TestClient(create_app(node, world)) for org, node in nodes.items()
    }
    yield world, nodes, clients
    world.stop()


def test_open_local_service(deployment):
    _, _, clients = deployment
    r = clients["O1"].post("/operators", json={"service_name": "O1.PLC1"})
    assert r.status_code == 201
    body = r.json()
    assert body["latency_record"]["path_class"] == "Local"
    assert body["session"]["service_name"] == "O1.PLC1"
    assert body["ra_id"]


def test_open_remote_service_is_new_overlap(deployment):
    _, _, clients = deployment
    r = clients["O1"].post("/operators", json={"service_name": "O2.PLC4"})
    assert r.status_code == 201
    assert r.json()["latency_record"]["path_class"] == "NewOverlap"


def test_open_unknown_service_404(deployment):
    _, _, clients = deployment
    r = clients["O1"].post("/operators", json={"service_name": "O9.PLC99"})
    assert r.status_code == 404


def test_services_local_and_reachable(deployment):
    _, _, clients = deployment
    local = clients["O1"].get("/services", params={"scope": "local"}).json()
    assert len(local) == 3
    reachable = clients["O1"].get("/services", params={"scope": "reachable"}).json()
    assert len(reachable) == 6
    # after an overlap the shared entry shows up locally
    clients["O1"].post("/operators", json={"service_name": "O2.PLC4"})
    local = clients["O1"].get("/services").json()
    assert len(local) == 4


def test_get_endpoints_are_pure(deployment):
    world, nodes, clients = deployment

    def state_hash():
        def snap():
            return json.dumps(
                {
                    "df": [e.to_payload() for e in nodes["O1"].df.entries],
                    "links": {
                        p: sorted(l.shared_in | l.shared_out)
                        for p, l in nodes["O1"].gs.links.items()
                    },
                    "ams": sorted(nodes["O1"].ams),
                },
                sort_keys=True,
            )

        return world.call(snap)

    before = state_hash()
    clients["O1"].get("/services", params={"scope": "reachable"})
    clients["O1"].get("/topology")
    assert state_hash() == before


def test_setpoint_verdicts(deployment):
    _, _, clients = deployment
    ra_id = clients["O1"].post("/operators", json={"service_name": "O1.PLC1"}).json()["ra_id"]
    ok = clients["O1"].post(f"/operators/{ra_id}/setpoints", json={"var": "temperature", "value": 50})
    assert ok.status_code == 200
    bad = clients["O1"].post(f"/operators/{ra_id}/setpoints", json={"var": "temperature", "value": 200})
    assert bad.status_code == 422 and bad.json()["detail"] == "OutOfRange"
    ro = clients["O1"].post(f"/operators/{ra_id}/setpoints", json={"var": "pressure", "value": 5})
    assert ro.status_code == 422 and ro.json()["detail"] == "NotWritable"
    missing = clients["O1"].post("/operators/nope/setpoints", json={"var": "temperature", "value": 1})
    assert missing.status_code == 404


def test_setpoint_after_close_conflicts(deployment):
    _, _, clients = deployment
    ra_id = clients["O1"].post("/operators", json={"service_name": "O1.PLC1"}).json()["ra_id"]
    assert clients["O1"].delete(f"/operators/{ra_id}").status_code == 204
    r = clients["O1"].post(f"/operators/{ra_id}/setpoints", json={"var": "temperature", "value": 50})
    assert r.status_code == 409


def test_event_stream_delivers_values_and_close(deployment):
    # The in-process test client buffers the whole response, so the stream
    # is only readable once the generator terminates; close the session from
    # a helper thread after a few poll periods of data has accumulated.
    world, nodes, clients = deployment
    ra_id = clients["O1"].post("/operators", json={"service_name": "O1.PLC1"}).json()["ra_id"]
    handle = clients["O1"].app.state.operators[ra_id]

    def close_later():
        time.sleep(1.5)
        world.call(handle.ra.close)

    closer = threading.Thread(target=close_later)
    closer.start()
    events = []
    with clients["O1"].stream("GET", f"/operators/{ra_id}/events") as response:
        assert response.status_code == 200
        for line in response.iter_lines():
            if line.startswith("data: "):
                events.append(json.loads(line[len("data: ") :]))
    closer.join()
    kinds = [event["type"] for event in events]
    assert kinds[0] == "session" and events[0]["state"] == "open"
    assert "value" in kinds
    assert events[-1]["type"] == "session" and events[-1]["state"] == "closed"


def test_stream_unknown_ra_404(deployment):
    _, _, clients = deployment
    assert clients["O1"].get("/operators/ghost/events").status_code == 404


def test_topology_gains_edge_after_remote_open(deployment):
    _, _, clients = deployment
    assert clients["O1"].get("/topology").json()["links"] == []
    clients["O1"].post("/operators", json={"service_name": "O2.PLC4"})
    topo = clients["O1"].get("/topology").json()
    assert len(topo["links"]) == 1
    assert topo["links"][0]["a"] == "O1" and topo["links"][0]["b"] == "O2"
    assert topo["links"][0]["shared"] == ["O2.PLC4"]
