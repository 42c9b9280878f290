"""Organization structure management.

The Global Supervisor (GS) is the static part of an organization: it boots
the local supervisors, runs the adaptation control loop, resolves service
triggers raised by the dynamic part, negotiates with other organizations over
Contract Net, and maintains the overlap links.  Local Supervisors (LS) manage
one dynamic-agent type each: creation, configuration, heartbeat monitoring,
recreation of dead agents, and PLC load balancing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigInvalid, Unroutable
from .kernel import (
    AdaptationEvent,
    Agent,
    AgentId,
    AgentSpec,
    Node,
    parse_service_name,
    service_owner,
)
from .plantsim import PlcConfig
from .scada import (
    ControlAgent,
    GS_NAME,
    LS_CA,
    LS_RA,
    PATH_EXTEND,
    PATH_NEW,
    RemoteOperatorAgent,
)
from .wire import MessageEnvelope

log = logging.getLogger(__name__)

__all__ = [
    "AdaptationEvent",
    "AgentDefaults",
    "Acquaintance",
    "ContractNetState",
    "GlobalSupervisor",
    "LocalSupervisor",
    "OrganizationConfig",
    "OverlapLink",
    "Trigger",
    "boot_organization",
    "spawn_operator",
]


@dataclass
class AgentDefaults:
    poll_period_ms: int = 500
    heartbeat_period_ms: int = 1000
    heartbeat_miss_limit: int = 3
    adaptation_period_ms: int = 500
    cfp_deadline_ms: int = 2000
    award_deadline_ms: int = 2000
    resolve_timeout_ms: int = 10000
    link_grace_ms: int = 60000

    def to_doc(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_doc(cls, doc: dict) -> "AgentDefaults":
        known = {k: int(v) for k, v in doc.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class Acquaintance:
    org_name: str
    address: str = ""


@dataclass
class OrganizationConfig:
    org_name: str
    listen_address: str = ""
    acquaintances: list[Acquaintance] = field(default_factory=list)
    plcs: list[PlcConfig] = field(default_factory=list)
    defaults: AgentDefaults = field(default_factory=AgentDefaults)
    ca_count: Optional[int] = None  # multi-PLC mode when set
    seed: int = 0

    def validate(self) -> None:
        if not self.org_name:
            raise ConfigInvalid("org_name required")
        names = [a.org_name for a in self.acquaintances]
        if len(names) != len(set(names)):
            raise ConfigInvalid("duplicate acquaintance names")
        if self.org_name in names:
            raise ConfigInvalid("an organization cannot be its own acquaintance")
        plc_names = [p.plc_name for p in self.plcs]
        if len(plc_names) != len(set(plc_names)):
            raise ConfigInvalid("duplicate PLC names")
        for p in self.plcs:
            try:
                p.validate()
            except ValueError as exc:
                raise ConfigInvalid(str(exc)) from None
        if self.ca_count is not None and self.ca_count < 1:
            raise ConfigInvalid("ca_count must be >= 1")

    def to_doc(self) -> dict:
        return {
            "org_name": self.org_name,
            "listen_address": self.listen_address,
            "acquaintances": [
                {"org_name": a.org_name, "address": a.address} for a in self.acquaintances
            ],
            "plcs": [p.to_doc() for p in self.plcs],
            "defaults": self.defaults.to_doc(),
            "ca_count": self.ca_count,
            "seed": self.seed,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "OrganizationConfig":
        return cls(
            org_name=doc["org_name"],
            listen_address=doc.get("listen_address", ""),
            acquaintances=[
                Acquaintance(a["org_name"], a.get("address", ""))
                for a in doc.get("acquaintances", [])
            ],
            plcs=[PlcConfig.from_doc(p) for p in doc.get("plcs", [])],
            defaults=AgentDefaults.from_doc(doc.get("defaults", {})),
            ca_count=doc.get("ca_count"),
            seed=int(doc.get("seed", 0)),
        )


@dataclass
class Trigger:
    kind: str  # "TRJA" | "TFJA"
    service_name: str
    origin: str
    conversation_id: str


@dataclass
class OverlapLink:
    peer_org: str
    shared_in: set[str] = field(default_factory=set)
    shared_out: set[str] = field(default_factory=set)
    established_at: int = 0
    last_activity: int = 0
    consumer: bool = False  # we have acquired services from this peer


@dataclass
class ContractNetState:
    conversation_id: str
    service_name: str
    responders: set[str] = field(default_factory=set)
    proposals: dict[str, dict] = field(default_factory=dict)
    refusals: set[str] = field(default_factory=set)
    deadline: int = 0
    phase: str = "CfpSent"  # CfpSent | Awarding | Done | Failed
    accepts_sent: list[tuple[str, str]] = field(default_factory=list)  # (conv, org)
    rejects_sent: list[tuple[str, str]] = field(default_factory=list)
    reawarded: bool = False
    award_order: list[str] = field(default_factory=list)


class _Pending:
    """One in-flight service resolution, possibly shared by several triggers."""

    __slots__ = ("service_name", "convs", "path_class", "mode", "cnp", "timer", "primary_conv")

    def __init__(self, service_name: str, conv: str, origin: str, mode: str):
        self.service_name = service_name
        self.convs: list[tuple[str, str]] = [(conv, origin)]
        self.primary_conv = conv
        self.mode = mode  # "extend" | "cnp"
        self.path_class = PATH_EXTEND if mode == "extend" else PATH_NEW
        self.cnp: Optional[ContractNetState] = None
        self.timer: Optional[int] = None


class GlobalSupervisor(Agent):
    role = "GlobalSupervisor"

    def start(self) -> None:
        self.config = OrganizationConfig.from_doc(self.spec.config_payload)
        self.node.gs = self
        d = self.config.defaults
        self.links: dict[str, OverlapLink] = {}
        self.pending: dict[str, _Pending] = {}
        self.trigger_sessions: dict[str, int] = {}
        self.admin_sessions: dict[str, int] = {}
        self.satisfied_trjas: set[str] = set()
        self.cnp_log: list[ContractNetState] = []
        self._boot_supervisors()
        self.every(d.adaptation_period_ms, self.adaptation_step)

    def _boot_supervisors(self) -> None:
        d = self.config.defaults.to_doc()
        # one local supervisor per dynamic-agent type; the CA supervisor then
        # creates one control agent per assigned process
        self.node.create_agent(AgentSpec(LS_CA, "LocalSupervisor", {}))
        self.node.create_agent(AgentSpec(LS_RA, "LocalSupervisor", {}))
        self.send(
            "REQUEST",
            f"{LS_CA}@{self.aid.org_name}",
            self.node.new_conversation("cfg"),
            "Admin",
            {
                "type": "configure",
                "agent_type": "ControlAgent",
                "plcs": [p.to_doc() for p in self.config.plcs],
                "defaults": d,
                "seed": self.config.seed,
                "ca_count": self.config.ca_count,
            },
        )
        self.send(
            "REQUEST",
            f"{LS_RA}@{self.aid.org_name}",
            self.node.new_conversation("cfg"),
            "Admin",
            {"type": "configure", "agent_type": "RemoteOperatorAgent", "defaults": d},
        )

    # ------------------------------------------------------------------
    # messaging

    def on_message(self, env: MessageEnvelope) -> None:
        ptype = env.ptype
        if env.protocol == "Trigger":
            if ptype == "trja":
                self._on_trja(env)
            elif ptype == "tfja":
                self._on_tfja(env)
        elif env.protocol == "ContractNet":
            self._on_contract_net(env, ptype)
        elif env.protocol == "ShareExtension":
            self._on_share(env, ptype)
        elif env.protocol == "Admin":
            self._on_admin(env, ptype)

    # ------------------------------------------------------------------
    # triggers (the bottom-up excitation of reorganization)

    def _on_trja(self, env: MessageEnvelope) -> None:
        service = env.payload["service_name"]
        origin = env.payload["origin"]
        conv = env.conversation_id
        self.node.log_event(
            "TriggerReceived", {"kind": "TRJA", "service_name": service, "conversation_id": conv}
        )
        pend = self.pending.get(service)
        if pend is not None:
            # concurrent duplicate triggers coalesce on the service name
            pend.convs.append((conv, origin))
            return
        try:
            owner = service_owner(service)
        except ValueError:
            self._fail_conversation(conv, origin, "ServiceUnknownEverywhere")
            return
        link = self.links.get(owner)
        if link is not None and link.consumer:
            pend = _Pending(service, conv, origin, "extend")
            self.pending[service] = pend
            request_conv = self.node.new_conversation("shx")
            try:
                self.send(
                    "REQUEST",
                    f"{GS_NAME}@{owner}",
                    request_conv,
                    "ShareExtension",
                    {
                        "type": "share-request",
                        "service_name": service,
                        "requester_org": self.aid.org_name,
                        "conv": conv,
                    },
                )
            except Unroutable:
                del self.pending[service]
                self._fail_conversation(conv, origin, "PeerUnreachable")
                return
            pend.timer = self.schedule(
                self.config.defaults.award_deadline_ms, lambda: self._pending_timeout(service)
            )
        else:
            self._start_contract_net(service, conv, origin)

    def _on_tfja(self, env: MessageEnvelope) -> None:
        service = env.payload["service_name"]
        trja_conv = env.payload.get("trja_conv", "")
        if trja_conv not in self.satisfied_trjas:
            self.node.log_event(
                "TriggerReceived",
                {"kind": "TFJA", "service_name": service, "anomaly": "unknown-trja"},
            )
            return
        self.satisfied_trjas.discard(trja_conv)
        self.node.log_event(
            "TriggerReceived",
            {"kind": "TFJA", "service_name": service, "conversation_id": trja_conv},
        )
        self.trigger_sessions[service] = self.trigger_sessions.get(service, 0) - 1
        self._maybe_release(service)

    def _fail_conversation(self, conv: str, origin: str, reason: str) -> None:
        try:
            self.send(
                "FAILURE",
                origin,
                conv,
                "Trigger",
                {"type": "resolve-failed", "reason": reason},
            )
        except Unroutable:
            log.warning("cannot deliver resolve failure to %s", origin)

    def _fail_pending(self, pend: _Pending, reason: str) -> None:
        self.pending.pop(pend.service_name, None)
        if pend.timer is not None:
            self.cancel(pend.timer)
        for conv, origin in pend.convs:
            self._fail_conversation(conv, origin, reason)

    def _pending_timeout(self, service: str) -> None:
        pend = self.pending.get(service)
        if pend is None:
            return
        if pend.mode == "cnp" and pend.cnp is not None and pend.cnp.phase == "CfpSent":
            self._cnp_award(pend)
            return
        if pend.mode == "cnp" and pend.cnp is not None and pend.cnp.phase == "Awarding":
            self._cnp_award_failed(pend)
            return
        self._fail_pending(pend, "Timeout")

    # ------------------------------------------------------------------
    # contract net (initiator)

    def _start_contract_net(self, service: str, conv: str, origin: str) -> None:
        acquaintances = [a.org_name for a in self.config.acquaintances]
        if not acquaintances:
            self._fail_conversation(conv, origin, "ServiceUnknownEverywhere")
            self.node.log_event(
                "CnpFailed", {"service_name": service, "reason": "no-acquaintances"}
            )
            return
        pend = _Pending(service, conv, origin, "cnp")
        cnp_conv = self.node.new_conversation("cnp")
        st = ContractNetState(
            conversation_id=cnp_conv,
            service_name=service,
            deadline=self.node.world.now_ms + self.config.defaults.cfp_deadline_ms,
        )
        pend.cnp = st
        self.pending[service] = pend
        self.cnp_log.append(st)
        for org in acquaintances:
            try:
                self.send(
                    "CFP",
                    f"{GS_NAME}@{org}",
                    cnp_conv,
                    "ContractNet",
                    {"type": "cfp", "service_name": service, "conv": conv},
                )
                st.responders.add(org)
            except Unroutable:
                continue
        if not st.responders:
            self.pending.pop(service, None)
            st.phase = "Failed"
            self._fail_conversation(conv, origin, "ServiceUnknownEverywhere")
            self.node.log_event("CnpFailed", {"service_name": service, "reason": "unroutable"})
            return
        pend.timer = self.schedule(
            self.config.defaults.cfp_deadline_ms, lambda: self._pending_timeout(service)
        )

    def _on_contract_net(self, env: MessageEnvelope, ptype: str) -> None:
        if env.performative == "CFP":
            self._cnp_respond(env)
            return
        if env.performative == "ACCEPT_PROPOSAL":
            self._cnp_perform_share(env)
            return
        if env.performative == "REJECT_PROPOSAL" and "requester" not in env.payload:
            # a refusal or loss notice addressed to us
            self._cnp_collect(env, proposed=False)
            return
        if env.performative == "PROPOSE":
            self._cnp_collect(env, proposed=True)
            return
        if env.performative == "FAILURE" and env.payload.get("type") == "dead-letter":
            self._cnp_dead_letter(env)

    def _find_cnp(self, conversation_id: str) -> Optional[_Pending]:
        base = conversation_id.split("#", 1)[0]
        for pend in self.pending.values():
            if pend.cnp is not None and pend.cnp.conversation_id == base:
                return pend
        return None

    def _cnp_collect(self, env: MessageEnvelope, proposed: bool) -> None:
        pend = self._find_cnp(env.conversation_id)
        if pend is None or pend.cnp is None or pend.cnp.phase != "CfpSent":
            return
        st = pend.cnp
        org = env.sender_org
        if proposed:
            st.proposals[org] = {"load_metric": float(env.payload.get("load_metric", 0.0))}
        else:
            st.refusals.add(org)
        if len(st.proposals) + len(st.refusals) >= len(st.responders):
            if pend.timer is not None:
                self.cancel(pend.timer)
                pend.timer = None
            self._cnp_award(pend)

    def _cnp_award(self, pend: _Pending) -> None:
        st = pend.cnp
        assert st is not None
        candidates = sorted(
            st.proposals.items(), key=lambda kv: (kv[1]["load_metric"], kv[0])
        )
        st.award_order = [org for org, _ in candidates]
        if not candidates:
            st.phase = "Failed"
            self.node.log_event(
                "CnpFailed", {"service_name": st.service_name, "reason": "no-proposals"}
            )
            self._fail_pending(pend, "ServiceUnknownEverywhere")
            return
        st.phase = "Awarding"
        winner = st.award_order[0]
        self._cnp_send_award(pend, winner, st.conversation_id)
        for org, _ in candidates[1:]:
            st.rejects_sent.append((st.conversation_id, org))
            self.send(
                "REJECT_PROPOSAL",
                f"{GS_NAME}@{org}",
                st.conversation_id,
                "ContractNet",
                {"type": "cnp-reject", "reason": "lost", "requester": self.aid.org_name},
            )

    def _cnp_send_award(self, pend: _Pending, winner: str, conv: str) -> None:
        st = pend.cnp
        assert st is not None
        st.accepts_sent.append((conv, winner))
        try:
            self.send(
                "ACCEPT_PROPOSAL",
                f"{GS_NAME}@{winner}",
                conv,
                "ContractNet",
                {
                    "type": "cnp-award",
                    "service_name": st.service_name,
                    "requester_org": self.aid.org_name,
                    "conv": pend.primary_conv,
                },
            )
        except Unroutable:
            self._cnp_award_failed(pend)
            return
        pend.timer = self.schedule(
            self.config.defaults.award_deadline_ms,
            lambda: self._pending_timeout(pend.service_name),
        )

    def _cnp_dead_letter(self, env: MessageEnvelope) -> None:
        original = env.payload.get("original", {})
        if original.get("performative") == "CFP":
            # unreachable responder counts as a refusal
            pend = self._find_cnp(env.conversation_id)
            if pend is not None and pend.cnp is not None and pend.cnp.phase == "CfpSent":
                pend.cnp.refusals.add(env.sender_org)
                if len(pend.cnp.proposals) + len(pend.cnp.refusals) >= len(pend.cnp.responders):
                    if pend.timer is not None:
                        self.cancel(pend.timer)
                        pend.timer = None
                    self._cnp_award(pend)
            return
        if original.get("performative") != "ACCEPT_PROPOSAL":
            return
        pend = self._find_cnp(env.conversation_id)
        if pend is not None and pend.cnp is not None and pend.cnp.phase == "Awarding":
            if pend.timer is not None:
                self.cancel(pend.timer)
                pend.timer = None
            self._cnp_award_failed(pend)

    def _cnp_award_failed(self, pend: _Pending) -> None:
        st = pend.cnp
        assert st is not None
        if not st.reawarded and len(st.award_order) > 1:
            # one re-award to the next-best proposer, under a fresh conversation
            st.reawarded = True
            self._cnp_send_award(pend, st.award_order[1], st.conversation_id + "#2")
            return
        st.phase = "Failed"
        self.node.log_event(
            "CnpFailed", {"service_name": st.service_name, "reason": "winner-failed"}
        )
        self._fail_pending(pend, "ServiceUnknownEverywhere")

    # contract net (responder) ------------------------------------------

    def _cnp_respond(self, env: MessageEnvelope) -> None:
        service = env.payload["service_name"]
        hits = self.node.df.search(service)
        if hits:
            ras = len(self.node.live_agents("RemoteOperatorAgent"))
            cas = max(1, len(self.node.live_agents("ControlAgent")))
            self.reply(
                env,
                "PROPOSE",
                {"type": "cnp-propose", "load_metric": ras / cas},
            )
        else:
            self.reply(env, "REJECT_PROPOSAL", {"type": "cnp-refuse", "reason": "no-service"})

    def _cnp_perform_share(self, env: MessageEnvelope) -> None:
        service = env.payload["service_name"]
        requester = env.payload["requester_org"]
        self._do_share(
            service, requester, conv=env.payload.get("conv", ""), path_class=PATH_NEW, reply_to=env
        )

    # ------------------------------------------------------------------
    # overlap establishment and release

    def _on_share(self, env: MessageEnvelope, ptype: str) -> None:
        if ptype == "share-request":
            self._do_share(
                env.payload["service_name"],
                env.payload["requester_org"],
                conv=env.payload.get("conv", ""),
                path_class=PATH_EXTEND,
                reply_to=env,
            )
        elif ptype == "share-released":
            self._on_share_released(env)
        elif ptype == "share-notice":
            self._on_share_notice(env)
        elif ptype == "share-failed" and env.performative == "FAILURE":
            service = env.payload.get("service_name", "")
            pend = self.pending.get(service)
            if pend is not None:
                self._fail_pending(pend, env.payload.get("reason", "ServiceUnknownEverywhere"))
        elif env.performative == "FAILURE" and env.payload.get("type") == "dead-letter":
            # share request could not reach the peer supervisor
            for pend in list(self.pending.values()):
                if pend.mode == "extend":
                    self._fail_pending(pend, "PeerUnreachable")

    def _do_share(
        self,
        service: str,
        requester: str,
        conv: str,
        path_class: str,
        reply_to: MessageEnvelope,
    ) -> None:
        hits = self.node.df.search(service)
        if not hits:
            self.send(
                "FAILURE",
                reply_to.sender,
                reply_to.conversation_id,
                "ShareExtension",
                {
                    "type": "share-failed",
                    "service_name": service,
                    "reason": "ServiceUnknownEverywhere",
                },
            )
            return
        entry = hits[0]
        provider = entry.provider
        reg_conv = self.node.new_conversation("reg")
        if provider.org_name == self.aid.org_name:
            # instruct the owning control agent to register into the
            # requester's directory
            link = self.links.setdefault(
                requester, OverlapLink(requester, established_at=self.node.world.now_ms)
            )
            link.shared_out.add(service)
            link.last_activity = self.node.world.now_ms
            self.send(
                "REQUEST",
                str(provider),
                reg_conv,
                "Admin",
                {
                    "type": "register-remote",
                    "org": requester,
                    "service_name": service,
                    "conv": conv,
                    "path_class": path_class,
                    "replace": False,
                },
            )
        else:
            # we only hold a shared copy: register it on the requester's
            # behalf and notify the true owner so its records stay correct
            try:
                self.send(
                    "REQUEST",
                    f"df@{requester}",
                    reg_conv,
                    "ShareExtension",
                    {
                        "type": "remote-register",
                        "entry": entry.to_payload(),
                        "conv": conv,
                        "path_class": path_class,
                        "replace": False,
                    },
                )
                self.send(
                    "INFORM",
                    f"{GS_NAME}@{provider.org_name}",
                    reg_conv,
                    "ShareExtension",
                    {
                        "type": "share-notice",
                        "service_name": service,
                        "requester_org": requester,
                        "provider": str(provider),
                    },
                )
            except Unroutable:
                pass

    def _on_share_notice(self, env: MessageEnvelope) -> None:
        # a shared copy of one of our services was re-shared to a third org
        service = env.payload["service_name"]
        requester = env.payload["requester_org"]
        link = self.links.setdefault(
            requester, OverlapLink(requester, established_at=self.node.world.now_ms)
        )
        link.shared_out.add(service)
        link.last_activity = self.node.world.now_ms
        provider = AgentId.parse(env.payload["provider"])
        if provider.local_name in self.node.ams:
            self.send(
                "INFORM",
                str(provider),
                env.conversation_id,
                "Admin",
                {"type": "share-notice", "service_name": service, "requester_org": requester},
            )

    def _on_share_released(self, env: MessageEnvelope) -> None:
        service = env.payload["service_name"]
        requester = env.payload["requester_org"]
        link = self.links.get(requester)
        if link is not None:
            link.shared_out.discard(service)
            link.last_activity = self.node.world.now_ms
        hits = [e for e in self.node.df.search(service) if e.home_org == self.aid.org_name]
        for entry in hits:
            if entry.provider.local_name in self.node.ams:
                self.send(
                    "INFORM",
                    str(entry.provider),
                    env.conversation_id,
                    "Admin",
                    {"type": "share-revoked", "service_name": service, "org": requester},
                )

    # requester side: a remote descriptor landed in our DF -----------------

    def on_remote_registration(self, entry, payload: dict) -> None:
        service = entry.service_name
        peer = entry.home_org
        if peer == self.aid.org_name:
            return
        now = self.node.world.now_ms
        new_link = peer not in self.links
        link = self.links.setdefault(peer, OverlapLink(peer, established_at=now))
        link.shared_in.add(service)
        link.consumer = True
        link.last_activity = now
        pend = self.pending.pop(service, None)
        if pend is not None:
            if pend.timer is not None:
                self.cancel(pend.timer)
            if pend.cnp is not None:
                pend.cnp.phase = "Done"
            kind = "OverlapEstablished" if new_link else "ShareExtended"
            self.node.log_event(
                kind,
                {
                    "service_name": service,
                    "peer": peer,
                    "conversation_id": pend.primary_conv,
                    "path_class": pend.path_class,
                },
            )
            for conv, origin in pend.convs:
                self.satisfied_trjas.add(conv)
                self.trigger_sessions[service] = self.trigger_sessions.get(service, 0) + 1
                try:
                    self.send(
                        "INFORM",
                        origin,
                        conv,
                        "Trigger",
                        {
                            "type": "resolved",
                            "entry": entry.to_payload(),
                            "path_class": pend.path_class,
                        },
                    )
                except Unroutable:
                    log.warning("resolved service %s but origin %s unreachable", service, origin)
        elif (
            self.trigger_sessions.get(service, 0) == 0
            and self.admin_sessions.get(service, 0) == 0
        ):
            # unsolicited share with no session holding it; this happens when
            # a provider-side restore push crosses our release in flight.
            # Refuse it so both sides converge on the released state.
            self._maybe_release(service)
        elif payload.get("replace"):
            self.node.log_event(
                "ShareExtended", {"service_name": service, "peer": peer, "restored": True}
            )

    def on_remote_deregistration(self, service_name: str, provider: AgentId) -> None:
        link = self.links.get(provider.org_name)
        if link is not None and service_name in link.shared_in:
            link.shared_in.discard(service_name)
            link.last_activity = self.node.world.now_ms
            self.node.log_event(
                "ShareReleased",
                {"service_name": service_name, "peer": provider.org_name, "reason": "deregistered"},
            )

    def _maybe_release(self, service: str) -> None:
        if self.trigger_sessions.get(service, 0) > 0 or self.admin_sessions.get(service, 0) > 0:
            return
        remote_entries = [
            e for e in self.node.df.search(service) if e.home_org != self.aid.org_name
        ]
        for entry in remote_entries:
            self.node.df.deregister(service, entry.provider)
            link = self.links.get(entry.home_org)
            if link is not None:
                link.shared_in.discard(service)
                link.last_activity = self.node.world.now_ms
            try:
                self.send(
                    "INFORM",
                    f"{GS_NAME}@{entry.home_org}",
                    self.node.new_conversation("rel"),
                    "ShareExtension",
                    {
                        "type": "share-released",
                        "service_name": service,
                        "requester_org": self.aid.org_name,
                    },
                )
            except Unroutable:
                pass
            self.node.log_event(
                "ShareReleased",
                {"service_name": service, "peer": entry.home_org, "reason": "tfja"},
            )

    # ------------------------------------------------------------------
    # admin plumbing

    def _on_admin(self, env: MessageEnvelope, ptype: str) -> None:
        if ptype == "session-open":
            service = env.payload["service_name"]
            self.admin_sessions[service] = self.admin_sessions.get(service, 0) + 1
        elif ptype == "session-close":
            service = env.payload["service_name"]
            self.admin_sessions[service] = self.admin_sessions.get(service, 0) - 1
            self._maybe_release(service)
        elif ptype == "restore-remote":
            self._restore_remote(env)
        elif ptype == "quarantine":
            self.node.log_event(
                "AgentRecreated", {"agent": env.payload.get("agent"), "quarantined": True}
            )
        elif ptype == "heartbeat":
            self.reply(env, "INFORM", {"type": "heartbeat-ack"})

    def _restore_remote(self, env: MessageEnvelope) -> None:
        provider = env.payload["provider"]
        for service in env.payload.get("services", []):
            peers = [p for p, l in self.links.items() if service in l.shared_out]
            for peer in peers:
                self.send(
                    "REQUEST",
                    f"{provider}@{self.aid.org_name}",
                    self.node.new_conversation("reg"),
                    "Admin",
                    {
                        "type": "register-remote",
                        "org": peer,
                        "service_name": service,
                        "conv": "",
                        "path_class": None,
                        "replace": True,
                    },
                )

    # ------------------------------------------------------------------
    # adaptation control loop

    def adaptation_step(self) -> None:
        """One monitor-analyze-act cycle; a consistent state is a fixpoint."""
        now = self.node.world.now_ms
        # reconcile shared_in against actual DF contents
        for link in list(self.links.values()):
            for service in sorted(link.shared_in):
                entries = self.node.df.search(service)
                if not any(e.home_org == link.peer_org for e in entries):
                    link.shared_in.discard(service)
                    link.last_activity = now
                    self.node.log_event(
                        "ShareReleased",
                        {
                            "service_name": service,
                            "peer": link.peer_org,
                            "reason": "reconciled",
                        },
                    )
        # adopt remote descriptors the link table somehow missed
        for entry in list(self.node.df.entries):
            if entry.home_org == self.aid.org_name:
                continue
            link = self.links.get(entry.home_org)
            if link is None or entry.service_name not in link.shared_in:
                link = self.links.setdefault(
                    entry.home_org, OverlapLink(entry.home_org, established_at=now)
                )
                link.shared_in.add(entry.service_name)
                link.consumer = True
                link.last_activity = now
                self.node.log_event(
                    "ShareExtended",
                    {
                        "service_name": entry.service_name,
                        "peer": entry.home_org,
                        "adopted": True,
                    },
                )
        # expire idle links
        grace = self.config.defaults.link_grace_ms
        for peer, link in list(self.links.items()):
            if not link.shared_in and not link.shared_out and now - link.last_activity > grace:
                del self.links[peer]
                self.node.log_event(
                    "ShareReleased", {"peer": peer, "reason": "link-retired"}
                )

    # ------------------------------------------------------------------
    # introspection

    def topology(self) -> dict:
        links = []
        for peer in sorted(self.links):
            link = self.links[peer]
            links.append(
                {
                    "a": self.aid.org_name,
                    "b": peer,
                    "shared": sorted(link.shared_in | link.shared_out),
                }
            )
        return {
            "orgs": sorted({self.aid.org_name, *(a.org_name for a in self.config.acquaintances)}),
            "links": links,
            "generated_at": self.node.world.now_ms,
        }

    def reload_acquaintances(self, acquaintances: list[Acquaintance]) -> None:
        self.config.acquaintances = list(acquaintances)
        self.config.validate()


class LocalSupervisor(Agent):
    role = "LocalSupervisor"

    def start(self) -> None:
        self.agent_type = ""
        self.defaults = AgentDefaults()
        self.roster: dict[str, dict] = {}
        self._hb_started = False

    # -- configuration ---------------------------------------------------

    def _configure(self, env: MessageEnvelope) -> None:
        payload = env.payload
        self.agent_type = payload["agent_type"]
        self.defaults = AgentDefaults.from_doc(payload.get("defaults", {}))
        if self.agent_type == "ControlAgent":
            self._create_control_agents(payload)
        if not self._hb_started:
            self._hb_started = True
            self.every(self.defaults.heartbeat_period_ms, self._heartbeat_sweep)

    def _create_control_agents(self, payload: dict) -> None:
        plcs = payload.get("plcs", [])
        seed = int(payload.get("seed", 0))
        ca_count = payload.get("ca_count")
        for name, assigned in self.assign_plcs(plcs, ca_count).items():
            spec = AgentSpec(
                name,
                "ControlAgent",
                {
                    "plcs": assigned,
                    "poll_period_ms": self.defaults.poll_period_ms,
                    "seed": seed,
                },
            )
            self.node.create_agent(spec)
            self._adopt(name, spec)

    @staticmethod
    def assign_plcs(plcs: list[dict], ca_count: Optional[int]) -> dict[str, list[dict]]:
        """Distribute PLCs over control agents; counts never differ by 2+."""
        if ca_count is None:
            out = {}
            for doc in plcs:
                _, idx = parse_service_name(doc["plc_name"])
                out[f"C{idx}"] = [doc]
            return out
        assignment: dict[str, list[dict]] = {f"CA{k + 1}": [] for k in range(ca_count)}
        names = list(assignment)
        for i, doc in enumerate(plcs):
            assignment[names[i % ca_count]].append(doc)
        return assignment

    def _adopt(self, name: str, spec: AgentSpec) -> None:
        self.roster[name] = {
            "spec": spec,
            "awaiting": None,
            "misses": 0,
            "recent": [],
            "quarantined": False,
        }

    def adopt(self, name: str) -> None:
        """Take an operator-created dynamic agent under supervision."""
        agent = self.node.require_live(name)
        self._adopt(name, agent.spec)

    # -- supervision -----------------------------------------------------

    def _heartbeat_sweep(self) -> None:
        limit = self.defaults.heartbeat_miss_limit
        for name, entry in list(self.roster.items()):
            if entry["quarantined"]:
                continue
            if entry["awaiting"] is not None:
                entry["misses"] += 1
                if entry["misses"] >= limit:
                    self._recreate(name)
                    continue
            else:
                entry["misses"] = 0
            conv = self.node.new_conversation("hb")
            entry["awaiting"] = conv
            try:
                self.send(
                    "REQUEST",
                    f"{name}@{self.aid.org_name}",
                    conv,
                    "Admin",
                    {"type": "heartbeat"},
                )
            except Unroutable:
                pass

    def _recreate(self, name: str) -> None:
        entry = self.roster.get(name)
        if entry is None or entry["quarantined"]:
            return
        now = self.node.world.now_ms
        window = 10 * self.defaults.heartbeat_period_ms
        entry["recent"] = [t for t in entry["recent"] if now - t <= window]
        if len(entry["recent"]) >= 3:
            entry["quarantined"] = True
            self.node.log_event("AgentRecreated", {"agent": name, "quarantined": True})
            self.send(
                "INFORM",
                f"{GS_NAME}@{self.aid.org_name}",
                self.node.new_conversation("qtn"),
                "Admin",
                {"type": "quarantine", "agent": name},
            )
            return
        entry["recent"].append(now)
        self.node.cleanup_dead(name)
        self.node.create_agent(entry["spec"])
        entry["awaiting"] = None
        entry["misses"] = 0
        self.node.log_event("AgentRecreated", {"agent": name})
        if entry["spec"].role == "ControlAgent":
            services = [doc["plc_name"] for doc in entry["spec"].config_payload.get("plcs", [])]
            self.send(
                "REQUEST",
                f"{GS_NAME}@{self.aid.org_name}",
                self.node.new_conversation("rst"),
                "Admin",
                {"type": "restore-remote", "provider": name, "services": services},
            )

    # -- messaging -------------------------------------------------------

    def on_message(self, env: MessageEnvelope) -> None:
        ptype = env.ptype
        if env.protocol == "Admin":
            if ptype == "configure":
                self._configure(env)
            elif ptype == "heartbeat-ack":
                entry = self.roster.get(AgentId.parse(env.sender).local_name)
                if entry is not None and entry["awaiting"] == env.conversation_id:
                    entry["awaiting"] = None
                    entry["misses"] = 0
            elif ptype == "heartbeat":
                self.reply(env, "INFORM", {"type": "heartbeat-ack"})
            elif ptype == "dead-letter":
                self._on_dead_letter(env)
        elif env.protocol == "Trigger":
            # bypass dynamic-part triggers straight to the global supervisor
            self.send(
                env.performative,
                f"{GS_NAME}@{self.aid.org_name}",
                env.conversation_id,
                "Trigger",
                env.payload,
            )

    def _on_dead_letter(self, env: MessageEnvelope) -> None:
        original = env.payload.get("original", {})
        if original.get("type") != "heartbeat":
            return
        name = AgentId.parse(original.get("receiver", "?@?")).local_name
        if name in self.roster and name not in self.node.ams:
            self._recreate(name)


def boot_organization(world, config: OrganizationConfig) -> Node:
    """Create a node and start its organization boot sequence."""
    config.validate()
    if config.org_name in world.nodes:
        raise ConfigInvalid(f"organization {config.org_name} already booted")
    node = Node(world, config.org_name)
    node.agent_factories = {
        "GlobalSupervisor": GlobalSupervisor,
        "LocalSupervisor": LocalSupervisor,
        "ControlAgent": ControlAgent,
        "RemoteOperatorAgent": RemoteOperatorAgent,
    }
    node.create_agent(AgentSpec(GS_NAME, "GlobalSupervisor", config.to_doc()))
    return node


def spawn_operator(node: Node, local_name: Optional[str] = None) -> RemoteOperatorAgent:
    """Create one operator session agent and put it under supervision."""
    if local_name is None:
        n = 1
        while f"R{n}" in node.ams:
            n += 1
        local_name = f"R{n}"
    node.create_agent(AgentSpec(local_name, "RemoteOperatorAgent", {}))
    ls = node.ams.get(LS_RA)
    agent = node.ams[local_name]
    if ls is not None:
        ls.adopt(local_name)
    return agent
