"""Dynamic-agent behaviors: control agents and remote operator agents.

Control agents (CAs) own simulated PLCs and answer read/subscribe/setpoint
requests from any operator agent whose organization they are registered in.
Remote operator agents (RAs) embody one operator session each: they resolve a
service, subscribe to its variables, relay setpoints, and emit the
finished-activity trigger when a cross-organization session closes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import SessionClosed
from .kernel import (
    Agent,
    AgentId,
    DF_NAME,
    FsmBehaviour,
    ServiceDescriptor,
)
from .plantsim import Plc, PlcConfig
from .wire import MessageEnvelope

log = logging.getLogger(__name__)

PATH_LOCAL = "Local"
PATH_SHARED = "SharedAlready"
PATH_EXTEND = "ExtendOverlap"
PATH_NEW = "NewOverlap"

LS_CA = "LS-CA"
LS_RA = "LS-RA"
GS_NAME = "GS"


@dataclass
class LatencyRecord:
    requester_org: str
    service_name: str
    path_class: str
    t_service_ms: int

    def to_doc(self) -> dict:
        return {
            "requester_org": self.requester_org,
            "service_name": self.service_name,
            "path_class": self.path_class,
            "t_service_ms": self.t_service_ms,
        }


@dataclass
class OperatorSession:
    ra: AgentId
    service: ServiceDescriptor
    latency: LatencyRecord
    opened_at: int
    subscriptions: set[str] = field(default_factory=set)
    trja_conv: Optional[str] = None
    df_sid: Optional[int] = None
    closed: bool = False


class ControlAgent(Agent):
    """Service provider bound to one PLC (or several in multi-PLC mode)."""

    role = "ControlAgent"

    # extension point for higher-level control strategies; receives
    # (agent, plc, changed_var_names) after every tick
    control_hook: Optional[Callable] = None

    def start(self) -> None:
        cfg = self.spec.config_payload
        self.poll_period_ms = int(cfg.get("poll_period_ms", 500))
        seed = int(cfg.get("seed", 0))
        clock = lambda: self.node.world.now_ms  # noqa: E731
        self.plcs: dict[str, Plc] = {}
        for doc in cfg.get("plcs", []):
            plc_cfg = PlcConfig.from_doc(doc)
            self.plcs[plc_cfg.plc_name] = Plc(plc_cfg, seed=seed, clock=clock)
        self.allowed_orgs: set[str] = {self.aid.org_name}
        # service_name -> set of peer orgs our descriptor is registered in
        self.remote_registrations: dict[str, set[str]] = {}
        # subscriber agent id -> set of service names they watch
        self._watchers: dict[str, set[str]] = {}
        self.paused_until = 0
        for plc_name in self.plcs:
            self.node.df.register(self._descriptor(plc_name))
        self.every(self.poll_period_ms, self._poll)

    def _descriptor(self, service_name: str) -> ServiceDescriptor:
        return ServiceDescriptor(
            service_name=service_name,
            service_type="ProcessAccess",
            provider=self.aid,
            home_org=self.aid.org_name,
            registered_at=self.node.world.now_ms,
        )

    def on_destroy(self) -> None:
        for service_name, orgs in self.remote_registrations.items():
            for org in orgs:
                self.send(
                    "REQUEST",
                    f"{DF_NAME}@{org}",
                    self.node.new_conversation("dereg"),
                    "ShareExtension",
                    {
                        "type": "remote-deregister",
                        "service_name": service_name,
                        "provider": str(self.aid),
                    },
                )

    # -- process loop ---------------------------------------------------

    def pause(self, duration_ms: int) -> None:
        self.paused_until = self.node.world.now_ms + duration_ms

    def _poll(self) -> None:
        if self.node.world.now_ms < self.paused_until:
            return
        for service_name, plc in self.plcs.items():
            changed = plc.tick(self.poll_period_ms)
            if changed:
                self._notify_watchers(service_name, plc, changed)
            if ControlAgent.control_hook is not None:
                ControlAgent.control_hook(self, plc, changed)

    def _notify_watchers(self, service_name: str, plc: Plc, changed: list[str]) -> None:
        now = self.node.world.now_ms
        for watcher, services in list(self._watchers.items()):
            if service_name not in services:
                continue
            for var in changed:
                reading = plc.read(var, self.poll_period_ms)
                self.send(
                    "NOTIFY",
                    watcher,
                    f"feed-{service_name}",
                    "DataFeed",
                    {
                        "type": "var-change",
                        "service_name": service_name,
                        "var": var,
                        "value": reading["value"],
                        "quality": reading["quality"],
                        "t": now,
                    },
                )

    # -- validation -----------------------------------------------------

    def validate_setpoint(self, service_name: str, var: str, value) -> tuple[bool, str]:
        plc = self.plcs.get(service_name)
        if plc is None:
            return False, "UnknownService"
        spec = next((v for v in plc.config.variables if v.name == var), None)
        if spec is None:
            return False, "UnknownVariable"
        if not spec.writable:
            return False, "NotWritable"
        if not isinstance(value, (int, float)) or not (spec.min <= value <= spec.max):
            return False, "OutOfRange"
        return True, ""

    # -- messaging ------------------------------------------------------

    def on_message(self, env: MessageEnvelope) -> None:
        ptype = env.ptype
        if env.protocol == "Admin":
            self._on_admin(env, ptype)
        elif env.protocol == "DataFeed":
            self._on_datafeed(env, ptype)

    def _on_admin(self, env: MessageEnvelope, ptype: str) -> None:
        if ptype == "heartbeat":
            self.reply(env, "INFORM", {"type": "heartbeat-ack"})
        elif ptype == "register-remote":
            org = env.payload["org"]
            service_name = env.payload["service_name"]
            self.allowed_orgs.add(org)
            self.remote_registrations.setdefault(service_name, set()).add(org)
            self.send(
                "REQUEST",
                f"{DF_NAME}@{org}",
                env.conversation_id,
                "ShareExtension",
                {
                    "type": "remote-register",
                    "entry": self._descriptor(service_name).to_payload(),
                    "conv": env.payload.get("conv", env.conversation_id),
                    "path_class": env.payload.get("path_class"),
                    "replace": bool(env.payload.get("replace")),
                },
            )
        elif ptype == "share-notice":
            org = env.payload["requester_org"]
            self.allowed_orgs.add(org)
            self.remote_registrations.setdefault(env.payload["service_name"], set()).add(org)
        elif ptype == "share-revoked":
            # the consumer side already dropped our descriptor
            org = env.payload["org"]
            self.remote_registrations.get(env.payload["service_name"], set()).discard(org)
            if not any(org in orgs for orgs in self.remote_registrations.values()):
                self.allowed_orgs.discard(org)
        elif ptype == "deregister-remote":
            org = env.payload["org"]
            service_name = env.payload["service_name"]
            self.remote_registrations.get(service_name, set()).discard(org)
            if not any(org in orgs for orgs in self.remote_registrations.values()):
                self.allowed_orgs.discard(org)
            self.send(
                "REQUEST",
                f"{DF_NAME}@{org}",
                env.conversation_id,
                "ShareExtension",
                {
                    "type": "remote-deregister",
                    "service_name": service_name,
                    "provider": str(self.aid),
                },
            )

    def _on_datafeed(self, env: MessageEnvelope, ptype: str) -> None:
        if env.performative == "FAILURE":
            return
        requester_org = env.sender_org
        if requester_org not in self.allowed_orgs:
            self.reply(env, "FAILURE", {"type": "not-shared", "reason": "not-shared"})
            return
        if ptype == "read":
            service_name = env.payload["service_name"]
            plc = self.plcs.get(service_name)
            if plc is None:
                self.reply(env, "FAILURE", {"type": "read-failed", "reason": "UnknownService"})
                return
            try:
                reading = plc.read(env.payload["var"], self.poll_period_ms)
            except Exception as exc:
                self.reply(
                    env, "FAILURE", {"type": "read-failed", "reason": type(exc).__name__}
                )
                return
            self.reply(env, "INFORM", {"type": "read-result", **reading})
        elif ptype == "setpoint":
            service_name = env.payload["service_name"]
            var = env.payload["var"]
            value = env.payload["value"]
            ok, reason = self.validate_setpoint(service_name, var, value)
            if not ok:
                self.reply(env, "FAILURE", {"type": "setpoint-reject", "reason": reason})
                return
            self.plcs[service_name].write(var, value)
            self.reply(env, "INFORM", {"type": "setpoint-ack", "var": var, "value": value})
        elif ptype == "subscribe-vars":
            service_name = env.payload["service_name"]
            plc = self.plcs.get(service_name)
            if plc is None:
                self.reply(env, "FAILURE", {"type": "subscribe-failed", "reason": "UnknownService"})
                return
            self._watchers.setdefault(env.sender, set()).add(service_name)
            snapshot = {
                name: plc.read(name, self.poll_period_ms)["value"] for name in plc.var_names()
            }
            self.reply(
                env,
                "INFORM",
                {"type": "subscribed", "service_name": service_name, "snapshot": snapshot},
            )
        elif ptype == "unsubscribe":
            services = self._watchers.get(env.sender)
            if services is not None:
                services.discard(env.payload.get("service_name", ""))
                if not services:
                    del self._watchers[env.sender]


class RemoteOperatorAgent(Agent):
    """Per-operator session agent; one service per session."""

    role = "RemoteOperatorAgent"

    def start(self) -> None:
        self.session: Optional[OperatorSession] = None
        self.fsm = FsmBehaviour(
            states=("Idle", "WaitResolve", "Active", "Closed"),
            transitions={
                ("Idle", "open"): "WaitResolve",
                ("Idle", "hit"): "Active",
                ("WaitResolve", "resolved"): "Active",
                ("WaitResolve", "failed"): "Closed",
                ("Active", "close"): "Closed",
            },
            initial="Idle",
            terminal=("Closed",),
        )
        self._open_conv: Optional[str] = None
        self._open_t0 = 0
        self._open_service: Optional[str] = None
        self._open_timer: Optional[int] = None
        self.on_ready: Optional[Callable] = None
        self.on_event: Optional[Callable] = None
        self._setpoint_waiters: dict[str, Callable] = {}
        self._sp_counter = 0

    # -- public surface (driven by harness or gateway) -------------------

    def open(
        self,
        service_name: str,
        on_ready: Optional[Callable] = None,
        on_event: Optional[Callable] = None,
        timeout_ms: int = 10_000,
    ) -> None:
        if self.fsm.state != "Idle":
            raise SessionClosed("session already opened")
        self.on_ready = on_ready
        self.on_event = on_event
        self._open_t0 = self.node.world.now_ms
        self._open_service = service_name
        hits = self.node.df.search(service_name)
        if hits:
            entry = hits[0]
            path = PATH_LOCAL if entry.home_org == self.aid.org_name else PATH_SHARED
            self.fsm.step("hit")
            self._establish(entry, path, trja_conv=None)
            return
        # local miss: notify the local supervisor, which relays the trigger
        conv = self.node.new_conversation("trja")
        self._open_conv = conv
        self.fsm.step("open")
        self.send(
            "REQUEST",
            f"{LS_RA}@{self.aid.org_name}",
            conv,
            "Trigger",
            {"type": "trja", "service_name": service_name, "origin": str(self.aid)},
        )
        self._open_timer = self.schedule(timeout_ms, self._open_timeout)

    def send_setpoint(self, var: str, value, on_verdict: Optional[Callable] = None) -> None:
        if self.session is None or self.session.closed:
            raise SessionClosed(str(self.aid))
        self._sp_counter += 1
        conv = f"sp-{self.aid.local_name}-{self._sp_counter}"
        if on_verdict is not None:
            self._setpoint_waiters[conv] = on_verdict
        self.send(
            "REQUEST",
            str(self.session.service.provider),
            conv,
            "DataFeed",
            {
                "type": "setpoint",
                "service_name": self.session.service.service_name,
                "var": var,
                "value": value,
            },
        )

    def close(self) -> None:
        if self.session is None or self.session.closed:
            return
        session = self.session
        session.closed = True
        try:
            self.fsm.step("close")
        except ValueError:
            pass
        self.send(
            "REQUEST",
            str(session.service.provider),
            f"feed-{session.service.service_name}",
            "DataFeed",
            {"type": "unsubscribe", "service_name": session.service.service_name},
        )
        if session.df_sid is not None:
            self.node.df.unsubscribe(session.df_sid)
        if session.trja_conv is not None:
            # cross-org session opened through a trigger: conclude the joint activity
            self.send(
                "REQUEST",
                f"{LS_RA}@{self.aid.org_name}",
                self.node.new_conversation("tfja"),
                "Trigger",
                {
                    "type": "tfja",
                    "service_name": session.service.service_name,
                    "trja_conv": session.trja_conv,
                },
            )
        elif session.latency.path_class == PATH_SHARED:
            self.send(
                "REQUEST",
                f"{GS_NAME}@{self.aid.org_name}",
                self.node.new_conversation("sess"),
                "Admin",
                {"type": "session-close", "service_name": session.service.service_name},
            )
        self._emit({"type": "session", "state": "closed"})

    def on_destroy(self) -> None:
        self.close()

    # -- internals -------------------------------------------------------

    def _establish(self, entry: ServiceDescriptor, path_class: str, trja_conv: Optional[str]) -> None:
        now = self.node.world.now_ms
        # model principle: the provider must be discoverable in our own DF
        assert self.node.df.search(entry.service_name), "provider absent from local DF"
        record = LatencyRecord(
            requester_org=self.aid.org_name,
            service_name=entry.service_name,
            path_class=path_class,
            t_service_ms=now - self._open_t0,
        )
        self.session = OperatorSession(
            ra=self.aid,
            service=entry,
            latency=record,
            opened_at=now,
            trja_conv=trja_conv,
        )
        self.session.df_sid = self.node.df.subscribe(entry.service_name, self.aid)
        self._subscribe_vars()
        if path_class == PATH_SHARED:
            self.send(
                "REQUEST",
                f"{GS_NAME}@{self.aid.org_name}",
                self.node.new_conversation("sess"),
                "Admin",
                {"type": "session-open", "service_name": entry.service_name},
            )
        if self.on_ready is not None:
            self.on_ready(self.session, None)
        self._emit({"type": "session", "state": "open", "path_class": path_class})

    def _subscribe_vars(self) -> None:
        session = self.session
        self.send(
            "SUBSCRIBE",
            str(session.service.provider),
            f"feed-{session.service.service_name}",
            "DataFeed",
            {"type": "subscribe-vars", "service_name": session.service.service_name},
        )

    def _open_timeout(self) -> None:
        if self.fsm.state == "WaitResolve":
            self.fsm.step("failed")
            if self.on_ready is not None:
                self.on_ready(None, "Timeout")

    def _fail_open(self, reason: str) -> None:
        if self.fsm.state == "WaitResolve":
            self.fsm.step("failed")
            if self._open_timer is not None:
                self.cancel(self._open_timer)
            if self.on_ready is not None:
                self.on_ready(None, reason)

    def _emit(self, event: dict) -> None:
        if self.on_event is not None:
            event.setdefault("t", self.node.world.now_ms)
            self.on_event(event)

    # -- messaging --------------------------------------------------------

    def on_message(self, env: MessageEnvelope) -> None:
        ptype = env.ptype
        if env.protocol == "Trigger":
            if env.performative == "INFORM" and ptype == "resolved":
                self._on_resolved(env)
            elif env.performative == "FAILURE":
                self._fail_open(env.payload.get("reason", "resolve-failed"))
        elif env.protocol == "DataFeed":
            self._on_datafeed(env, ptype)
        elif env.protocol == "Admin":
            if ptype == "heartbeat":
                self.reply(env, "INFORM", {"type": "heartbeat-ack"})
            elif ptype == "df-notify":
                self._on_df_notify(env)

    def _on_resolved(self, env: MessageEnvelope) -> None:
        if self.fsm.state != "WaitResolve" or env.conversation_id != self._open_conv:
            return
        if self._open_timer is not None:
            self.cancel(self._open_timer)
        from .kernel import ServiceDescriptor as SD

        entry = SD.from_payload(env.payload["entry"])
        self.fsm.step("resolved")
        self._establish(entry, env.payload.get("path_class", PATH_NEW), trja_conv=self._open_conv)

    def _on_datafeed(self, env: MessageEnvelope, ptype: str) -> None:
        if ptype == "var-change":
            self._emit(
                {
                    "type": "value",
                    "var": env.payload["var"],
                    "value": env.payload["value"],
                    "quality": env.payload["quality"],
                    "t": env.payload["t"],
                }
            )
        elif ptype == "subscribed":
            if self.session is not None:
                self.session.subscriptions = set(env.payload.get("snapshot", {}))
            self._emit({"type": "snapshot", "values": env.payload.get("snapshot", {})})
        elif ptype == "read-result":
            self._emit(
                {
                    "type": "value",
                    "var": env.payload["var"],
                    "value": env.payload["value"],
                    "quality": env.payload["quality"],
                    "t": env.payload["t"],
                }
            )
        elif ptype == "setpoint-ack":
            waiter = self._setpoint_waiters.pop(env.conversation_id, None)
            if waiter is not None:
                waiter(True, "")
        elif ptype in ("setpoint-reject", "not-shared"):
            waiter = self._setpoint_waiters.pop(env.conversation_id, None)
            if waiter is not None:
                waiter(False, env.payload.get("reason", "rejected"))
        elif ptype == "dead-letter":
            waiter = self._setpoint_waiters.pop(env.conversation_id, None)
            if waiter is not None:
                waiter(False, "provider-unavailable")

    def _on_df_notify(self, env: MessageEnvelope) -> None:
        """Provider (re)appeared in our DF: resubscribe if it is our service."""
        session = self.session
        if session is None or session.closed:
            return
        from .kernel import ServiceDescriptor as SD

        entry = SD.from_payload(env.payload["entry"])
        if entry.service_name != session.service.service_name:
            return
        if entry.registered_at == session.service.registered_at:
            return  # the registration we opened against
        session.service = entry
        self._subscribe_vars()
        self._emit({"type": "session", "state": "resubscribed"})
