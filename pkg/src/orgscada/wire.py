"""Message envelope and canonical frame codec.

Frame format (bit-exact): a 4-byte big-endian length prefix followed by a
canonical JSON document (UTF-8, lexicographically ordered keys, compact
separators).  Encoding is deterministic, so golden frames can be committed
and compared byte for byte.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Any

from .errors import (
    MalformedDocument,
    PayloadTooLarge,
    Truncated,
    UnknownPerformative,
)

PERFORMATIVES = (
    "REQUEST",
    "INFORM",
    "CFP",
    "PROPOSE",
    "ACCEPT_PROPOSAL",
    "REJECT_PROPOSAL",
    "FAILURE",
    "SUBSCRIBE",
    "NOTIFY",
)

PROTOCOLS = ("Trigger", "ContractNet", "ShareExtension", "DataFeed", "Admin")

# Negotiation performatives are only meaningful inside a Contract Net
# conversation.
CONTRACT_NET_ONLY = {"CFP", "PROPOSE", "ACCEPT_PROPOSAL", "REJECT_PROPOSAL"}

MAX_FRAME_BODY = 16 * 1024 * 1024  # 16 MiB

_FIELDS = (
    "conversation_id",
    "payload",
    "performative",
    "protocol",
    "receiver",
    "sender",
    "sent_at",
)


@dataclass
class MessageEnvelope:
    """The only inter-agent communication unit."""

    performative: str
    sender: str  # "local_name@org_name"
    receiver: str
    conversation_id: str
    protocol: str
    payload: dict = field(default_factory=dict)
    sent_at: int = 0  # milliseconds on the sending clock

    def validate(self) -> None:
        if self.performative not in PERFORMATIVES:
            raise ValueError(f"unknown performative {self.performative!r}")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.performative in CONTRACT_NET_ONLY and self.protocol != "ContractNet":
            raise ValueError(
                f"{self.performative} only allowed with the ContractNet protocol"
            )
        for name in ("sender", "receiver"):
            value = getattr(self, name)
            if not isinstance(value, str) or "@" not in value:
                raise ValueError(f"{name} must look like 'local_name@org_name'")
        if not isinstance(self.conversation_id, str):
            raise ValueError("conversation_id must be a string")
        if not isinstance(self.payload, dict):
            raise ValueError("payload must be a mapping")
        if not isinstance(self.sent_at, int):
            raise ValueError("sent_at must be an integer millisecond timestamp")

    @property
    def sender_org(self) -> str:
        return self.sender.rsplit("@", 1)[1]

    @property
    def receiver_org(self) -> str:
        return self.receiver.rsplit("@", 1)[1]

    @property
    def ptype(self) -> str:
        """Payload discriminator ('type' key), empty string if absent."""
        t = self.payload.get("type", "")
        return t if isinstance(t, str) else ""


def encode(envelope: MessageEnvelope) -> bytes:
    """Serialize to the canonical length-prefixed frame."""
    envelope.validate()
    doc = {
        "conversation_id": envelope.conversation_id,
        "payload": envelope.payload,
        "performative": envelope.performative,
        "protocol": envelope.protocol,
        "receiver": envelope.receiver,
        "sender": envelope.sender,
        "sent_at": envelope.sent_at,
    }
    body = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    if len(body) > MAX_FRAME_BODY:
        raise PayloadTooLarge(f"frame body is {len(body)} bytes (max {MAX_FRAME_BODY})")
    return struct.pack(">I", len(body)) + body


def decode(data: bytes) -> MessageEnvelope:
    """Parse a frame; raises a CodecError subclass on anything invalid."""
    if not isinstance(data, (bytes, bytearray)):
        raise MalformedDocument("frame must be bytes")
    if len(data) < 4:
        raise Truncated("missing length prefix")
    (length,) = struct.unpack(">I", bytes(data[:4]))
    if length > MAX_FRAME_BODY:
        raise MalformedDocument(f"declared body length {length} exceeds maximum")
    body = bytes(data[4 : 4 + length])
    if len(body) < length:
        raise Truncated(f"body is {len(body)} bytes, prefix declares {length}")
    try:
        doc = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedDocument(str(exc)) from None
    if not isinstance(doc, dict):
        raise MalformedDocument("document root must be an object")
    missing = [f for f in _FIELDS if f not in doc]
    if missing:
        raise MalformedDocument(f"missing fields: {missing}")
    performative = doc["performative"]
    if not isinstance(performative, str) or performative not in PERFORMATIVES:
        raise UnknownPerformative(repr(performative))
    env = MessageEnvelope(
        performative=performative,
        sender=doc["sender"],
        receiver=doc["receiver"],
        conversation_id=doc["conversation_id"],
        protocol=doc["protocol"],
        payload=doc["payload"],
        sent_at=doc["sent_at"],
    )
    try:
        env.validate()
    except ValueError as exc:
        raise MalformedDocument(str(exc)) from None
    return env


def envelope(
    performative: str,
    sender: str,
    receiver: str,
    conversation_id: str,
    protocol: str,
    payload: dict | None = None,
    sent_at: int = 0,
) -> MessageEnvelope:
    """Convenience constructor used throughout the runtime."""
    return MessageEnvelope(
        performative=performative,
        sender=sender,
        receiver=receiver,
        conversation_id=conversation_id,
        protocol=protocol,
        payload=payload or {},
        sent_at=sent_at,
    )


@dataclass
class NetConfig:
    """Latency model for the simulated network.

    ``hop_latency_ms`` maps ordered org pairs ("O1->O2") to a fixed delay;
    ``default_hop_latency_ms`` applies to any pair without an explicit entry.
    """

    default_hop_latency_ms: int = 100
    hop_latency_ms: dict[str, int] = field(default_factory=dict)
    intra_org_latency_ms: int = 0
    seed: int = 0

    def latency(self, sender_org: str, receiver_org: str) -> int:
        if sender_org == receiver_org:
            return self.intra_org_latency_ms
        return self.hop_latency_ms.get(
            f"{sender_org}->{receiver_org}", self.default_hop_latency_ms
        )

    def validate(self) -> None:
        if self.default_hop_latency_ms < 0 or self.intra_org_latency_ms < 0:
            raise ValueError("latencies must be non-negative")
        for key, value in self.hop_latency_ms.items():
            if "->" not in key:
                raise ValueError(f"bad pair key {key!r}, expected 'A->B'")
            if value < 0:
                raise ValueError("latencies must be non-negative")
