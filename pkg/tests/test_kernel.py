import pytest

from orgscada.errors import (
    DuplicateEntry,
    DuplicateName,
    InvalidRole,
    NotFound,
    UnknownAgent,
)
from orgscada.kernel import (
    Agent,
    AgentId,
    AgentSpec,
    Node,
    ServiceDescriptor,
    FsmBehaviour,
    parse_service_name,
    service_owner,
)
from orgscada.simnet import SimWorld


class Probe(Agent):
    role = "ControlAgent"

    def start(self):
        self.inbox = []

    def on_message(self, env):
        self.inbox.append(env)


def make_node(org="O1"):
    world = SimWorld()
    node = Node(world, org)
    node.agent_factories = {"ControlAgent": Probe, "RemoteOperatorAgent": Probe}
    return world, node


def descriptor(node, service, provider="C1", home=None):
    return ServiceDescriptor(
        service_name=service,
        service_type="ProcessAccess",
        provider=AgentId(provider, home or node.org_name),
        home_org=home or node.org_name,
        registered_at=node.world.now_ms,
    )


def test_agent_id_parse_and_render():
    aid = AgentId.parse("C1@O2")
    assert (aid.local_name, aid.org_name) == ("C1", "O2")
    assert str(aid) == "C1@O2"


def test_service_name_parsing():
    assert parse_service_name("O2.PLC7") == ("O2", 7)
    assert service_owner("O10.PLC3") == "O10"
    with pytest.raises(ValueError):
        parse_service_name("PLC7")


def test_create_agent_and_duplicate():
    _, node = make_node()
    aid = node.create_agent(AgentSpec("C1", "ControlAgent", {}))
    assert str(aid) == "C1@O1"
    with pytest.raises(DuplicateName):
        node.create_agent(AgentSpec("C1", "ControlAgent", {}))
    with pytest.raises(InvalidRole):
        node.create_agent(AgentSpec("X", "Wizard", {}))


def test_destroy_agent_removes_registrations():
    _, node = make_node()
    aid = node.create_agent(AgentSpec("C1", "ControlAgent", {}))
    node.df.register(descriptor(node, "O1.PLC1"))
    node.destroy_agent(aid)
    assert node.df.search("O1.PLC1") == []
    with pytest.raises(NotFound):
        node.ams_lookup("C1")
    with pytest.raises(UnknownAgent):
        node.destroy_agent(aid)


def test_ams_lookup_live_only():
    _, node = make_node()
    node.create_agent(AgentSpec("C1", "ControlAgent", {}))
    assert str(node.ams_lookup("C1")) == "C1@O1"
    node.crash_agent("C1")
    with pytest.raises(NotFound):
        node.ams_lookup("C1")


def test_crash_leaves_df_dangling_cleanup_purges():
    _, node = make_node()
    node.create_agent(AgentSpec("C1", "ControlAgent", {}))
    node.df.register(descriptor(node, "O1.PLC1"))
    node.crash_agent("C1")
    assert len(node.df.search("O1.PLC1")) == 1  # dangling until supervision acts
    node.cleanup_dead("C1")
    assert node.df.search("O1.PLC1") == []


def test_df_register_search_and_duplicate():
    _, node = make_node()
    node.df.register(descriptor(node, "O1.PLC1"))
    assert len(node.df.search("O1.PLC1")) == 1
    assert node.df.search("O2.PLC7") == []
    with pytest.raises(DuplicateEntry):
        node.df.register(descriptor(node, "O1.PLC1"))
    node.df.register(descriptor(node, "O1.PLC1"), replace=True)  # upsert allowed


def test_df_prefix_search():
    _, node = make_node()
    for i in range(1, 7):
        node.df.register(descriptor(node, f"O1.PLC{i}", provider=f"C{i}"))
    assert len(node.df.search("O1.*")) == 6
    assert len(node.df.search("O2.*")) == 0


def test_df_search_ordered_by_registration():
    world, node = make_node()
    node.df.register(descriptor(node, "O1.PLC1", provider="C1"))
    world.run_until(10)
    node.df.register(descriptor(node, "O1.PLC2", provider="C2"))
    names = [e.service_name for e in node.df.search("O1.*")]
    assert names == ["O1.PLC1", "O1.PLC2"]


def test_df_subscribe_immediate_and_future():
    world, node = make_node()
    node.create_agent(AgentSpec("R1", "RemoteOperatorAgent", {}))
    ra = node.ams["R1"]
    node.df.register(descriptor(node, "O1.PLC1"))
    node.df.subscribe("O1.PLC1", ra.aid)
    world.drain_messages()
    assert len(ra.inbox) == 1  # existing match delivered immediately
    node.df.register(descriptor(node, "O1.PLC1", provider="C2"))
    world.drain_messages()
    assert len(ra.inbox) == 2


def test_df_subscription_dedup_per_entry():
    world, node = make_node()
    node.create_agent(AgentSpec("R1", "RemoteOperatorAgent", {}))
    ra = node.ams["R1"]
    node.df.register(descriptor(node, "O1.PLC1"))
    node.df.subscribe("O1.PLC1", ra.aid)
    node.df.subscribe("O1.PLC1", ra.aid)  # duplicate subscription
    world.drain_messages()
    assert len(ra.inbox) == 1  # one notification per (subscriber, entry)


def test_fsm_behaviour():
    fsm = FsmBehaviour(
        states=("A", "B", "C"),
        transitions={("A", "go"): "B", ("B", "go"): "C"},
        initial="A",
        terminal=("C",),
    )
    assert not fsm.done
    fsm.step("go")
    fsm.step("go")
    assert fsm.done
    with pytest.raises(ValueError):
        fsm.step("go")


def test_white_page_soundness_with_dispatch():
    world, node = make_node()
    node.create_agent(AgentSpec("C1", "ControlAgent", {}))
    aid = node.ams_lookup("C1")
    from orgscada.wire import envelope

    world.send(envelope("INFORM", "x@O1", str(aid), "c", "Admin", {}))
    world.drain_messages()
    assert len(node.ams["C1"].inbox) == 1
