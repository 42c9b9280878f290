"""Minimal per-organization agent runtime.

One :class:`Node` hosts the agents of a single organization together with its
two built-in registry services: the white pages (AMS, live agents by name)
and the yellow pages (DF, advertised services with search and subscription).
Registry operations are serialized with agent execution on the world's event
loop, so lookups are always consistent with delivery.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .errors import (
    DuplicateEntry,
    DuplicateName,
    InvalidRole,
    NotFound,
    UnknownAgent,
)
from .wire import MessageEnvelope, envelope

log = logging.getLogger(__name__)

ROLES = ("GlobalSupervisor", "LocalSupervisor", "ControlAgent", "RemoteOperatorAgent")

DF_NAME = "df"  # pseudo-address of the yellow-page service

_SERVICE_RE = re.compile(r"^(?P<org>O[1-9][0-9]*)\.PLC(?P<idx>[1-9][0-9]*)$")


@dataclass(frozen=True)
class AgentId:
    local_name: str
    org_name: str

    def __str__(self) -> str:
        return f"{self.local_name}@{self.org_name}"

    @classmethod
    def parse(cls, text: str) -> "AgentId":
        local, _, org = text.rpartition("@")
        if not local or not org:
            raise ValueError(f"bad agent id {text!r}")
        return cls(local, org)


@dataclass
class AgentSpec:
    local_name: str
    role: str
    config_payload: dict = field(default_factory=dict)


def parse_service_name(service_name: str) -> tuple[str, int]:
    """Split 'O2.PLC7' into its owner organization and PLC index."""
    m = _SERVICE_RE.match(service_name)
    if not m:
        raise ValueError(f"bad service name {service_name!r}")
    return m.group("org"), int(m.group("idx"))


def service_owner(service_name: str) -> str:
    return parse_service_name(service_name)[0]


@dataclass
class ServiceDescriptor:
    service_name: str
    service_type: str  # "ProcessAccess" | "Supervision"
    provider: AgentId
    home_org: str
    registered_at: int = 0

    def to_payload(self) -> dict:
        return {
            "service_name": self.service_name,
            "service_type": self.service_type,
            "provider": str(self.provider),
            "home_org": self.home_org,
            "registered_at": self.registered_at,
        }

    @classmethod
    def from_payload(cls, doc: dict) -> "ServiceDescriptor":
        return cls(
            service_name=doc["service_name"],
            service_type=doc["service_type"],
            provider=AgentId.parse(doc["provider"]),
            home_org=doc["home_org"],
            registered_at=int(doc["registered_at"]),
        )


class FsmBehaviour:
    """Small validated finite-state machine used by protocol behaviors."""

    def __init__(
        self,
        states: Iterable[str],
        transitions: dict[tuple[str, str], str],
        initial: str,
        terminal: Iterable[str] = (),
    ):
        self.states = set(states)
        self.transitions = dict(transitions)
        self.terminal = set(terminal)
        if initial not in self.states:
            raise ValueError(f"initial state {initial!r} not in states")
        for (src, event), dst in self.transitions.items():
            if src not in self.states or dst not in self.states:
                raise ValueError(f"transition ({src!r}, {event!r}) -> {dst!r} leaves the state set")
        if not self.terminal <= self.states:
            raise ValueError("terminal states must be a subset of states")
        self.state = initial

    @property
    def done(self) -> bool:
        return self.state in self.terminal

    def step(self, event: str) -> str:
        if self.done:
            raise ValueError(f"machine already halted in {self.state!r}")
        key = (self.state, event)
        if key not in self.transitions:
            raise ValueError(f"no transition for event {event!r} in state {self.state!r}")
        self.state = self.transitions[key]
        return self.state


@dataclass
class AdaptationEvent:
    at: int
    org: str
    kind: str
    detail: dict

    def to_doc(self) -> dict:
        return {"at": self.at, "org": self.org, "kind": self.kind, "detail": self.detail}


class Agent:
    """A logical sequential process: handles one message at a time."""

    role = "Agent"

    def __init__(self, node: "Node", aid: AgentId, spec: AgentSpec):
        self.node = node
        self.aid = aid
        self.spec = spec
        self._timers: set[int] = set()
        self.alive = True

    @property
    def name(self) -> str:
        return self.aid.local_name

    # lifecycle ---------------------------------------------------------

    def start(self) -> None:
        pass

    def on_destroy(self) -> None:
        """Graceful-shutdown hook; crash paths skip it."""

    def stop(self) -> None:
        self.alive = False
        for handle in self._timers:
            self.node.world.cancel(handle)
        self._timers.clear()

    # messaging ---------------------------------------------------------

    def on_message(self, env: MessageEnvelope) -> None:
        log.debug("%s ignoring %s/%s", self.aid, env.protocol, env.performative)

    def send(
        self,
        performative: str,
        receiver: str,
        conversation_id: str,
        protocol: str,
        payload: Optional[dict] = None,
    ) -> None:
        env = envelope(
            performative,
            sender=str(self.aid),
            receiver=receiver,
            conversation_id=conversation_id,
            protocol=protocol,
            payload=payload or {},
            sent_at=self.node.world.now_ms,
        )
        self.node.world.send(env)

    def reply(self, env: MessageEnvelope, performative: str, payload: Optional[dict] = None) -> None:
        self.send(performative, env.sender, env.conversation_id, env.protocol, payload)

    # timers ------------------------------------------------------------

    def schedule(self, delay_ms: int, fn: Callable[[], None]) -> int:
        handle = self.node.world.schedule(delay_ms, self._guarded(fn))
        self._timers.add(handle)
        return handle

    def cancel(self, handle: int) -> None:
        self._timers.discard(handle)
        self.node.world.cancel(handle)

    def every(self, period_ms: int, fn: Callable[[], None]) -> None:
        def tick():
            fn()
            if self.alive:
                self.schedule(period_ms, tick)

        self.schedule(period_ms, tick)

    def _guarded(self, fn: Callable[[], None]) -> Callable[[], None]:
        def run():
            if self.alive:
                fn()

        return run


class _Subscription:
    __slots__ = ("sid", "pattern", "subscriber")

    def __init__(self, sid: int, pattern: str, subscriber: AgentId):
        self.sid = sid
        self.pattern = pattern
        self.subscriber = subscriber


class Df:
    """Yellow-page registry with exact and trailing-wildcard search."""

    def __init__(self, node: "Node"):
        self.node = node
        self.entries: list[ServiceDescriptor] = []
        self._subs: dict[int, _Subscription] = {}
        self._next_sid = 0
        # one notification per (subscriber, concrete registration)
        self._delivered: set[tuple[str, str, str, int]] = set()

    def register(self, entry: ServiceDescriptor, replace: bool = False) -> None:
        for existing in list(self.entries):
            if (
                existing.service_name == entry.service_name
                and existing.provider == entry.provider
            ):
                if not replace:
                    raise DuplicateEntry(
                        f"{entry.service_name} by {entry.provider} already registered"
                    )
                self.entries.remove(existing)
        self.entries.append(entry)
        for sub in list(self._subs.values()):
            if self._matches(sub.pattern, entry.service_name):
                self._notify(sub, entry)

    def deregister(self, service_name: str, provider: AgentId) -> None:
        self.entries = [
            e
            for e in self.entries
            if not (e.service_name == service_name and e.provider == provider)
        ]

    def remove_provider(self, provider: AgentId) -> list[ServiceDescriptor]:
        removed = [e for e in self.entries if e.provider == provider]
        self.entries = [e for e in self.entries if e.provider != provider]
        return removed

    def search(self, query: str) -> list[ServiceDescriptor]:
        hits = [e for e in self.entries if self._matches(query, e.service_name)]
        hits.sort(key=lambda e: e.registered_at)
        return hits

    def subscribe(self, pattern: str, subscriber: AgentId) -> int:
        if subscriber.org_name == self.node.org_name:
            self.node.require_live(subscriber.local_name)
        self._next_sid += 1
        sub = _Subscription(self._next_sid, pattern, subscriber)
        self._subs[sub.sid] = sub
        for entry in self.search(pattern):
            self._notify(sub, entry)
        return sub.sid

    def unsubscribe(self, sid: int) -> None:
        self._subs.pop(sid, None)

    def drop_subscriber(self, subscriber: AgentId) -> None:
        for sid in [s.sid for s in self._subs.values() if s.subscriber == subscriber]:
            del self._subs[sid]

    @staticmethod
    def _matches(pattern: str, name: str) -> bool:
        if pattern.endswith("*"):
            return name.startswith(pattern[:-1])
        return name == pattern

    def _notify(self, sub: _Subscription, entry: ServiceDescriptor) -> None:
        key = (
            str(sub.subscriber),
            entry.service_name,
            str(entry.provider),
            entry.registered_at,
        )
        if key in self._delivered:
            return
        self._delivered.add(key)
        env = envelope(
            "NOTIFY",
            sender=f"{DF_NAME}@{self.node.org_name}",
            receiver=str(sub.subscriber),
            conversation_id=f"df-sub-{sub.sid}",
            protocol="Admin",
            payload={"type": "df-notify", "entry": entry.to_payload()},
            sent_at=self.node.world.now_ms,
        )
        self.node.world.send(env)


class Node:
    """One organization's runtime: agents plus AMS and DF registries."""

    def __init__(self, world, org_name: str):
        self.world = world
        self.org_name = org_name
        self.ams: dict[str, Agent] = {}
        self.df = Df(self)
        self.events: list[AdaptationEvent] = []
        self._conv_counter = 0
        self.agent_factories: dict[str, type] = {}
        self.gs = None  # set by the organization boot sequence
        world.attach(self)

    # conversations / events --------------------------------------------

    def new_conversation(self, prefix: str) -> str:
        self._conv_counter += 1
        return f"{prefix}-{self.org_name}-{self._conv_counter}"

    def log_event(self, kind: str, detail: dict) -> None:
        self.events.append(
            AdaptationEvent(at=self.world.now_ms, org=self.org_name, kind=kind, detail=detail)
        )

    # white pages --------------------------------------------------------

    def create_agent(self, spec: AgentSpec) -> AgentId:
        if spec.role not in ROLES:
            raise InvalidRole(spec.role)
        if spec.local_name in self.ams:
            raise DuplicateName(f"{spec.local_name} already live in {self.org_name}")
        factory = self.agent_factories.get(spec.role)
        if factory is None:
            raise InvalidRole(f"no factory installed for role {spec.role}")
        aid = AgentId(spec.local_name, self.org_name)
        agent = factory(self, aid, spec)
        self.ams[spec.local_name] = agent
        agent.start()
        return aid

    def destroy_agent(self, aid: AgentId) -> None:
        agent = self.ams.get(aid.local_name)
        if agent is None or aid.org_name != self.org_name:
            raise UnknownAgent(str(aid))
        agent.on_destroy()
        agent.stop()
        del self.ams[aid.local_name]
        self.df.remove_provider(aid)
        self.df.drop_subscriber(aid)

    def crash_agent(self, local_name: str) -> None:
        """Simulate an abrupt death: no graceful deregistration anywhere."""
        agent = self.ams.get(local_name)
        if agent is None:
            raise UnknownAgent(local_name)
        agent.stop()
        del self.ams[local_name]
        self.df.drop_subscriber(agent.aid)
        # DF entries intentionally left dangling until supervision cleans up.

    def cleanup_dead(self, local_name: str) -> None:
        """Purge registry leftovers of a crashed agent before recreation."""
        aid = AgentId(local_name, self.org_name)
        agent = self.ams.get(local_name)
        if agent is not None:
            agent.stop()
            del self.ams[local_name]
        self.df.remove_provider(aid)
        self.df.drop_subscriber(aid)

    def ams_lookup(self, name: str) -> AgentId:
        agent = self.ams.get(name)
        if agent is None:
            raise NotFound(f"{name}@{self.org_name}")
        return agent.aid

    def require_live(self, name: str) -> Agent:
        agent = self.ams.get(name)
        if agent is None:
            raise UnknownAgent(f"{name}@{self.org_name}")
        return agent

    def live_agents(self, role: Optional[str] = None) -> list[Agent]:
        agents = list(self.ams.values())
        if role is not None:
            agents = [a for a in agents if a.spec.role == role]
        return agents

    # transport ----------------------------------------------------------

    def deliver(self, env: MessageEnvelope) -> None:
        """Terminal delivery on this node; called by the transport."""
        local = AgentId.parse(env.receiver).local_name
        if local == DF_NAME:
            self._df_handle(env)
            return
        agent = self.ams.get(local)
        if agent is None:
            self.world.send_failure(env, "dead-letter")
            return
        try:
            agent.on_message(env)
        except Exception:
            log.exception("%s failed handling %s", agent.aid, env)

    # remote registrations arrive as messages addressed to df@<org>
    def _df_handle(self, env: MessageEnvelope) -> None:
        ptype = env.ptype
        if ptype == "remote-register":
            entry = ServiceDescriptor.from_payload(env.payload["entry"])
            entry.registered_at = self.world.now_ms
            try:
                self.df.register(entry, replace=bool(env.payload.get("replace")))
            except DuplicateEntry:
                self.world.send_failure(env, "duplicate-entry")
                return
            if self.gs is not None:
                self.gs.on_remote_registration(entry, env.payload)
        elif ptype == "remote-deregister":
            provider = AgentId.parse(env.payload["provider"])
            service_name = env.payload["service_name"]
            self.df.deregister(service_name, provider)
            if self.gs is not None:
                self.gs.on_remote_deregistration(service_name, provider)
        else:
            log.warning("df@%s dropping unknown payload %r", self.org_name, ptype)
